import { createApi, MetricsResponse } from './api.js'
import { ReviewQueue } from './queue.js'
import { renderCard, renderCriteria, renderMetrics, renderProgress, showToast } from './view.js'

export interface AppHandle {
  queue: ReviewQueue
  /** resolves when every queued operation (and its re-render) is done */
  settled(): Promise<void>
  lastMetrics(): MetricsResponse | null
  dispose(): void
}

function mustFind(root: ParentNode, selector: string): HTMLElement {
  const el = root.querySelector(selector)
  if (!el) throw new Error(`missing element ${selector}`)
  return el as HTMLElement
}

/** Wire the review UI into an already-loaded document. `base` stays
 * empty in production (same origin as `triage serve`); tests point it
 * at a server on another port. */
export function initApp(doc: Document, base = ''): AppHandle {
  const api = createApi(base)
  const card = mustFind(doc, '#card')
  const criteriaText = mustFind(doc, '#criteria-text')
  const metricsBody = mustFind(doc, '#metrics-body')
  const progress = mustFind(doc, '#progress')
  const toast = mustFind(doc, '#toast')

  let metrics: MetricsResponse | null = null
  let shownToast: string | null = null

  const queue = new ReviewQueue(api, async (state) => {
    renderCard(card, state, api.exportUrl())
    if (state.item) renderCriteria(criteriaText, state.item.criteria_text)
    if (state.toast && state.toast !== shownToast) {
      showToast(toast, state.toast)
    }
    shownToast = state.toast
    try {
      metrics = await api.metrics()
      renderMetrics(metricsBody, metrics)
      renderProgress(progress, metrics)
    } catch {
      // metrics are advisory; the card already shows any hard failure
    }
  })

  const onKey = (event: KeyboardEvent) => {
    if (event.ctrlKey || event.metaKey || event.altKey) return
    switch (event.key.toLowerCase()) {
      case 't':
        queue.submit('TRUE')
        break
      case 'f':
        queue.submit('FALSE')
        break
      case 'u':
        queue.submit('UNDECIDED')
        break
      case 'z':
        queue.undo()
        break
      case 'r':
        if (queue.state.phase === 'error') queue.retry()
        break
    }
  }
  doc.addEventListener('keydown', onKey)
  queue.start()

  return {
    queue,
    settled: () => queue.settled(),
    lastMetrics: () => metrics,
    dispose: () => doc.removeEventListener('keydown', onKey),
  }
}

