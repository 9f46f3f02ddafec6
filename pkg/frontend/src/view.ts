import { MetricsResponse, QueueItemView } from './api.js'
import { QueueState } from './queue.js'

function esc(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
}

function itemCard(item: QueueItemView): string {
  const description = item.description
    ? `<p class="description">${esc(item.description)}</p>`
    : '<p class="description missing">no description</p>'
  return `
    <h2>${esc(item.project_id)}</h2>
    <span class="badge ${item.auto_class === 'TRUE' ? 'true' : 'false'}">auto: ${item.auto_class}</span>
    ${description}
    <p><a href="${esc(item.url)}" target="_blank" rel="noopener noreferrer">${esc(item.url)}</a></p>
    <table class="counts">
      <tr><th>language</th><td>${item.language ? esc(item.language) : '&mdash;'}</td></tr>
      <tr><th>stars</th><td id="count-star">${item.star}</td></tr>
      <tr><th>watchers</th><td id="count-watcher">${item.watcher}</td></tr>
      <tr><th>committers</th><td id="count-committer">${item.committer}</td></tr>
      <tr><th>community</th><td id="count-community">${item.community}</td></tr>
    </table>`
}

export function renderCard(el: HTMLElement, state: QueueState, exportUrl: string): void {
  switch (state.phase) {
    case 'loading':
      el.innerHTML = '<p class="waiting">loading&hellip;</p>'
      break
    case 'item':
      el.innerHTML = itemCard(state.item as QueueItemView)
      break
    case 'done':
      el.innerHTML = `
        <h2>All items reviewed</h2>
        <p>Every flagged project has a decision.</p>
        <p><a id="export-link" href="${esc(exportUrl)}" download="labels.ndjson">Download decisions</a></p>`
      break
    case 'error':
      el.innerHTML = `
        <div class="banner" id="retry-banner">
          <p>Cannot reach the session server: ${esc(state.error ?? 'unknown error')}</p>
          <p>Nothing is lost. <kbd>R</kbd> retries.</p>
        </div>`
      break
  }
}

function pct(value: number | null): string {
  return value === null ? 'n/a' : `${(value * 100).toFixed(1)}%`
}

export function renderMetrics(el: HTMLElement, metrics: MetricsResponse): void {
  const rows: Array<[string, string]> = [
    ['decided', `${metrics.decided} / ${metrics.n_flagged}`],
    ['pending', String(metrics.pending)],
    ['undecided', String(metrics.undecided)],
    ['effort', pct(metrics.effort)],
    ['effort saved', pct(1 - metrics.effort)],
  ]
  if (metrics.metrics) {
    rows.push(['precision', pct(metrics.metrics.precision)])
    rows.push(['recall', pct(metrics.metrics.recall)])
  } else {
    rows.push(['precision', 'no truth labels'])
    rows.push(['recall', 'no truth labels'])
  }
  el.innerHTML = rows
    .map(([k, v]) => {
      const slug = k.replace(/ /g, '-')
      return `<div class="metric"><dt>${k}</dt><dd id="metric-${slug}">${esc(v)}</dd></div>`
    })
    .join('')
}

export function renderProgress(el: HTMLElement, metrics: MetricsResponse): void {
  el.textContent = `${metrics.decided + metrics.undecided} of ${metrics.n_flagged} reviewed`
}

export function renderCriteria(el: HTMLElement, text: string): void {
  el.textContent = text
}

let toastTimer: ReturnType<typeof setTimeout> | null = null

export function showToast(el: HTMLElement, message: string): void {
  el.textContent = message
  el.hidden = false
  if (toastTimer) clearTimeout(toastTimer)
  toastTimer = setTimeout(() => {
    el.hidden = true
  }, 4000)
}
