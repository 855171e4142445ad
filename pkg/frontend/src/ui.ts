// DOM rendering and keyboard wiring. All state lives in the controller;
// this layer only draws it and forwards key presses.

import { ReviewController } from './controller';
import type { ReviewItem, StatsResponse } from './types';

function el(tag: string, className: string, text = ''): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text) node.textContent = text;
  return node;
}

function renderItem(item: ReviewItem | null, editing: boolean): HTMLElement {
  const card = el('section', 'card');
  if (!item) {
    card.appendChild(el('p', 'done', 'Queue drained. Nothing left to review.'));
    return card;
  }
  const img = document.createElement('img');
  img.src = item.image_url;
  img.alt = item.image_id;
  img.onerror = () => img.classList.add('missing');
  card.appendChild(img);

  const fields = el('dl', 'fields');
  const rows: Array<[string, string]> = [
    ['Question', item.question],
    ['Type', item.question_type],
    ['Ground truth', item.ground_truth],
    ['Negative', item.negative],
    ['Feedback', item.feedback ?? '(none)'],
    ['Flags', item.filter_flags.join(', ') || '(clean)'],
    ['Revision', String(item.revision)],
  ];
  for (const [label, value] of rows) {
    fields.appendChild(el('dt', 'label', label));
    fields.appendChild(el('dd', `value field-${label.toLowerCase().replace(' ', '-')}`, value));
  }
  card.appendChild(fields);

  if (editing) {
    const form = el('div', 'edit-form');
    const negative = document.createElement('input');
    negative.id = 'edit-negative';
    negative.value = item.negative;
    const feedback = document.createElement('input');
    feedback.id = 'edit-feedback';
    feedback.value = item.feedback ?? '';
    form.append(el('span', 'label', 'negative:'), negative, el('span', 'label', 'feedback:'), feedback);
    form.appendChild(el('p', 'hint', 'Enter saves the changed field(s); Esc cancels.'));
    card.appendChild(form);
  } else {
    card.appendChild(el('p', 'hint', '[A]pprove  [R]eject  [E]dit  [N]ext'));
  }
  return card;
}

function renderStats(stats: StatsResponse | null, stale: boolean): HTMLElement {
  const panel = el('aside', 'stats');
  panel.appendChild(el('h2', '', 'Funnel'));
  if (stale) panel.appendChild(el('p', 'stale', 'stats may be stale (last fetch failed)'));
  if (!stats) return panel;
  const funnel = el('ul', 'funnel');
  for (const [stage, count] of Object.entries(stats.funnel)) {
    funnel.appendChild(el('li', `stage-${stage}`, `${stage}: ${count}`));
  }
  panel.appendChild(funnel);
  panel.appendChild(el('h2', '', 'Statuses'));
  const statuses = el('ul', 'statuses');
  for (const [status, count] of Object.entries(stats.statuses)) {
    statuses.appendChild(el('li', `status-${status}`, `${status}: ${count}`));
  }
  panel.appendChild(statuses);
  panel.appendChild(el('h2', '', 'Question types'));
  const types = el('ul', 'types');
  for (const row of stats.types) {
    types.appendChild(el('li', '', `${row.type}: ${row.count} (${row.proportion}%)`));
  }
  panel.appendChild(types);
  return panel;
}

export function mount(root: HTMLElement, controller: ReviewController): void {
  let editing = false;

  const draw = () => {
    root.replaceChildren();
    const banner = controller.banner;
    if (banner) {
      const text =
        banner.kind === 'offline'
          ? `offline: ${banner.pending} decision(s) queued, retrying on reconnect`
          : `server: ${banner.detail}`;
      root.appendChild(el('div', `banner banner-${banner.kind}`, text));
    }
    root.appendChild(renderItem(controller.current(), editing));
    root.appendChild(renderStats(controller.stats, controller.statsStale));
  };
  controller.onChange = draw;

  document.addEventListener('keydown', (event) => {
    const item = controller.current();
    if (!item) return;
    if (editing) {
      if (event.key === 'Escape') {
        editing = false;
        draw();
      } else if (event.key === 'Enter') {
        const negative = (document.getElementById('edit-negative') as HTMLInputElement).value;
        const feedback = (document.getElementById('edit-feedback') as HTMLInputElement).value;
        editing = false;
        const edits: Promise<void>[] = [];
        if (negative !== item.negative) edits.push(controller.editNegative(negative));
        else if (feedback !== (item.feedback ?? '')) edits.push(controller.editFeedback(feedback));
        void Promise.all(edits).then(draw);
      }
      return;
    }
    if (event.key === 'a' || event.key === 'A') void controller.approve();
    else if (event.key === 'r' || event.key === 'R') void controller.reject();
    else if (event.key === 'n' || event.key === 'N') void controller.skip();
    else if (event.key === 'e' || event.key === 'E') {
      editing = true;
      draw();
    }
  });

  window.addEventListener('online', () => void controller.flushPending());
  draw();
}
