import { ApiError, Decision, QueueItemView, TriageApi } from './api.js'

export type Phase = 'loading' | 'item' | 'done' | 'error'

export interface QueueState {
  phase: Phase
  item: QueueItemView | null
  /** retry banner text when phase is 'error' */
  error: string | null
  /** transient message (rejected POST, empty undo stack) */
  toast: string | null
  decidedHere: number
}

interface HistoryEntry {
  item: QueueItemView
  decision: Decision
}

type Listener = (state: QueueState) => void | Promise<void>

/** Review queue driver: serializes every operation so POSTs never
 * overlap, advances optimistically, and reconciles on the server ack. */
export class ReviewQueue {
  private api: TriageApi
  private listener: Listener
  private history: HistoryEntry[] = []
  private tail: Promise<void> = Promise.resolve()
  state: QueueState = {
    phase: 'loading',
    item: null,
    error: null,
    toast: null,
    decidedHere: 0,
  }

  constructor(api: TriageApi, listener: Listener = () => {}) {
    this.api = api
    this.listener = listener
  }

  /** Resolves once every operation enqueued so far has finished,
   * including its listener call. */
  settled(): Promise<void> {
    return this.tail
  }

  private enqueue(op: () => Promise<void>): Promise<void> {
    const run = async () => {
      try {
        await op()
      } catch (err) {
        // ops handle their own failures; anything escaping is a bug,
        // surface it as a banner rather than killing the chain
        this.state = {
          ...this.state,
          phase: 'error',
          error: err instanceof Error ? err.message : String(err),
        }
      }
      await this.listener(this.state)
    }
    this.tail = this.tail.then(run)
    return this.tail
  }

  start(): Promise<void> {
    return this.enqueue(() => this.fetchNext())
  }

  /** Re-fetch after a network failure; pending decisions are already
   * on the server, nothing is lost. */
  retry(): Promise<void> {
    return this.enqueue(() => this.fetchNext())
  }

  submit(decision: Decision): Promise<void> {
    return this.enqueue(async () => {
      if (this.state.phase !== 'item' || !this.state.item) return
      const item = this.state.item
      this.history.push({ item, decision })
      this.state = { ...this.state, phase: 'loading', item: null, toast: null }

      // optimistic: the label POST and the next-item GET race; if the
      // server hands back the item we just labeled, wait for the ack
      // and ask again
      const ack = this.api.label(item.project_id, decision)
      ack.catch(() => {})
      try {
        let next = await this.api.next()
        if (!next.empty && next.project_id === item.project_id) {
          await ack
          next = await this.api.next()
        } else {
          await ack
        }
        this.state = { ...this.state, decidedHere: this.state.decidedHere + 1 }
        this.applyNext(next)
      } catch (err) {
        if (err instanceof ApiError && err.status < 500) {
          // rejected decision: put the item back with a toast
          this.history.pop()
          this.state = {
            ...this.state,
            phase: 'item',
            item,
            toast: `decision rejected: ${err.message}`,
          }
        } else {
          this.state = {
            ...this.state,
            phase: 'error',
            error: err instanceof Error ? err.message : String(err),
          }
        }
      }
    })
  }

  /** Re-open the most recently labeled item. The next submit re-POSTs
   * and the server keeps the last write. */
  undo(): Promise<void> {
    return this.enqueue(async () => {
      const last = this.history.pop()
      if (!last) {
        this.state = { ...this.state, toast: 'nothing to undo' }
        return
      }
      this.state = {
        ...this.state,
        phase: 'item',
        item: last.item,
        error: null,
        toast: `was ${last.decision}; decide again`,
        decidedHere: Math.max(0, this.state.decidedHere - 1),
      }
    })
  }

  private async fetchNext(): Promise<void> {
    this.state = { ...this.state, phase: 'loading', error: null }
    try {
      this.applyNext(await this.api.next())
    } catch (err) {
      this.state = {
        ...this.state,
        phase: 'error',
        error: err instanceof Error ? err.message : String(err),
      }
    }
  }

  private applyNext(next: { empty?: boolean } & Partial<QueueItemView>): void {
    if (next.empty) {
      this.state = { ...this.state, phase: 'done', item: null, error: null }
    } else {
      this.state = {
        ...this.state,
        phase: 'item',
        item: next as QueueItemView,
        error: null,
      }
    }
  }
}
