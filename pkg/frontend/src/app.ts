import type { Session } from './session.js';
import type { Tri } from './state.js';

const LEGACY_ALIGNMENT_QUESTION = 'Does the image align with the prompt?';
const QUALITY_QUESTION = 'Is the image of good quality?';

const INSTRUCTIONS = [
  'Each row below names one part of the prompt. Mark Yes when the image shows that part correctly, No when it does not. Every row needs an explicit answer before you can submit.',
  'Counts must match exactly: a prompt asking for four donuts is wrong with three or five.',
  'Attribute rows ask about the named objects only. If the prompt says the pigs are pink, judge the pigs, not the background.',
  'Position rows (left of, behind, on top of, ...) are from the viewer\'s point of view. Allow unusual camera angles when the arrangement is still clearly correct.',
  'Action rows (chasing, jumping over, playing with) need the action visibly depicted, not just both animals present.',
  'The quality question is separate from correctness: an image can match the prompt and still be malformed, or look great and match nothing. Answer it last, on its own.',
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

function toggleRow(
  label: string,
  tag: string | null,
  state: Tri,
  testId: string,
  onSet: (value: boolean) => void,
): HTMLElement {
  const row = el('div', { class: 'toggle-row', 'data-testid': testId });
  const caption = el('div', { class: 'toggle-label' });
  caption.appendChild(el('span', { class: 'surface' }, label));
  if (tag) caption.appendChild(el('span', { class: 'kind-tag' }, tag));
  row.appendChild(caption);

  const buttons = el('div', { class: 'toggle-buttons' });
  for (const value of [true, false]) {
    const button = el(
      'button',
      {
        type: 'button',
        class: `toggle ${state === value ? 'selected' : ''}`,
        'data-testid': `${testId}-${value ? 'yes' : 'no'}`,
        'aria-pressed': String(state === value),
      },
      value ? 'Yes' : 'No',
    );
    button.addEventListener('click', () => onSet(value));
    buttons.appendChild(button);
  }
  row.appendChild(buttons);
  row.setAttribute('data-state', state === null ? 'unset' : state ? 'yes' : 'no');
  return row;
}

function banner(kind: string, testId: string, text: string): HTMLElement {
  return el('div', { class: `banner ${kind}`, 'data-testid': testId }, text);
}

/** Render the whole session into root; re-renders on every state change. */
export function mountApp(root: HTMLElement, session: Session): void {
  const render = () => {
    root.replaceChildren(build(session));
  };
  session.onChange(render);
  render();
}

function build(session: Session): HTMLElement {
  const container = el('div', { class: 'app' });

  const header = el('header', {});
  header.appendChild(el('h1', {}, 'Image annotation'));
  const progress = session.progress;
  header.appendChild(
    el(
      'div',
      { class: 'progress', 'data-testid': 'progress' },
      progress
        ? `${progress.completed} / ${progress.total} images done · you: ${
          progress.per_annotator[session.annotatorId] ?? 0
        }`
        : '…',
    ),
  );
  container.appendChild(header);

  const instructions = el('details', { class: 'instructions' });
  instructions.appendChild(el('summary', {}, 'Instructions'));
  const list = el('ul', {});
  for (const line of INSTRUCTIONS) list.appendChild(el('li', {}, line));
  instructions.appendChild(list);
  container.appendChild(instructions);

  if (session.connectionError !== null) {
    const offline = banner(
      'offline',
      'offline-banner',
      session.queued
        ? `Connection lost — your submission is queued (attempt ${session.queued.attempts}). Retrying…`
        : `Connection lost: ${session.connectionError}`,
    );
    const retry = el('button', { type: 'button', 'data-testid': 'retry' }, 'Retry now');
    retry.addEventListener('click', () => void session.retry());
    offline.appendChild(retry);
    container.appendChild(offline);
  }

  if (session.phase === 'loading') {
    container.appendChild(el('p', { 'data-testid': 'loading' }, 'Loading…'));
    return container;
  }

  if (session.phase === 'done') {
    const done = el('div', { class: 'done', 'data-testid': 'done-screen' });
    done.appendChild(el('h2', {}, 'All done'));
    done.appendChild(
      el('p', {}, 'There are no more images waiting for you. Thank you!'),
    );
    container.appendChild(done);
    return container;
  }

  const view = session.view;
  if (view === null) return container;

  if (session.rejection !== null) {
    container.appendChild(
      banner('rejection', 'rejection-banner', `The server rejected the submission: ${session.rejection}`),
    );
  }

  const card = el('section', { class: 'task-card' });
  card.appendChild(el('p', { class: 'prompt', 'data-testid': 'prompt-text' }, view.task.prompt_text));
  card.appendChild(
    el('img', {
      class: 'task-image',
      'data-testid': 'task-image',
      src: session.imageUrl(),
      alt: 'generated image under review',
    }),
  );
  container.appendChild(card);

  const form = el('section', { class: 'answers' });
  if (view.task.mode === 'checklist') {
    form.appendChild(el('h2', {}, 'Does the image show each part of the prompt?'));
    view.task.atoms.forEach((atom, index) => {
      form.appendChild(
        toggleRow(atom.surface, atom.kind, view.toggles[index] ?? null, 'atom-row', (value) =>
          session.setToggle(index, value)),
      );
    });
  } else {
    form.appendChild(el('h2', {}, 'Alignment'));
    form.appendChild(
      toggleRow(LEGACY_ALIGNMENT_QUESTION, null, view.toggles[0] ?? null, 'alignment-row', (value) =>
        session.setToggle(0, value)),
    );
  }
  form.appendChild(el('h2', {}, 'Quality'));
  form.appendChild(
    toggleRow(QUALITY_QUESTION, null, view.quality, 'quality-row', (value) =>
      session.setQuality(value)),
  );

  const submit = el(
    'button',
    { type: 'button', class: 'submit', 'data-testid': 'submit' },
    session.queued ? 'Queued…' : 'Submit and continue',
  );
  if (!session.canSubmit) submit.setAttribute('disabled', '');
  submit.addEventListener('click', () => void session.submit());
  form.appendChild(submit);
  container.appendChild(form);
  return container;
}
