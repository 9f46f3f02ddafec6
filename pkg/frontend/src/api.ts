export type Decision = 'TRUE' | 'FALSE' | 'UNDECIDED'

export interface QueueItemView {
  project_id: string
  description: string | null
  url: string
  language: string | null
  star: number
  watcher: number
  committer: number
  community: number
  auto_class: 'TRUE' | 'FALSE'
  criteria_text: string
}

export interface NextResponse extends Partial<QueueItemView> {
  empty?: boolean
  pending?: number
}

export interface SessionInfo {
  session_id: string
  total: number
  pending: number
  decided: number
  undecided: number
  effort: number
}

export interface MetricsBody {
  strategy: string
  precision: number | null
  recall: number | null
  f1: number | null
  tp: number
  fp: number
  fn: number
  tn: number
}

export interface MetricsResponse {
  effort: number
  n_total: number
  n_auto: number
  n_flagged: number
  pending: number
  decided: number
  undecided: number
  metrics: MetricsBody | null
}

export interface LabelAck {
  ok: boolean
  pending: number
}

/** Error carrying the HTTP status so callers can tell a rejected
 * decision (4xx) from the server being unreachable. */
export class ApiError extends Error {
  status: number

  constructor(status: number, message: string) {
    super(message)
    this.status = status
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { 'Content-Type': 'application/json' },
    ...init,
  })
  if (!response.ok) {
    let message = `${response.status} ${response.statusText}`
    try {
      const body = await response.json()
      if (body && typeof body.error === 'string') message = body.error
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ApiError(response.status, message)
  }
  return response.json() as Promise<T>
}

/** Client for the triage session API. `base` is empty when the UI is
 * served by the session server itself (same origin). */
export function createApi(base = '') {
  const root = base.replace(/\/$/, '')
  return {
    session(): Promise<SessionInfo> {
      return request(`${root}/api/session`)
    },
    next(): Promise<NextResponse> {
      return request(`${root}/api/next`)
    },
    item(projectId: string): Promise<QueueItemView> {
      return request(`${root}/api/item/${encodeURIComponent(projectId)}`)
    },
    metrics(): Promise<MetricsResponse> {
      return request(`${root}/api/metrics`)
    },
    label(projectId: string, decision: Decision): Promise<LabelAck> {
      return request(`${root}/api/label`, {
        method: 'POST',
        body: JSON.stringify({ project_id: projectId, decision }),
      })
    },
    exportUrl(): string {
      return `${root}/api/export`
    },
  }
}

export type TriageApi = ReturnType<typeof createApi>
