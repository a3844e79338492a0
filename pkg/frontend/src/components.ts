import type { FeatureView, PlanView } from './types.js';

type Child = Node | string | null | undefined;

/** Tiny element builder; attrs go through setAttribute except listeners. */
export function h(
  tag: string,
  attrs: Record<string, string | ((ev: Event) => void)> = {},
  ...children: Child[]
): HTMLElement {
  const el = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === 'function') {
      el.addEventListener(key.replace(/^on/, ''), value);
    } else {
      el.setAttribute(key, value);
    }
  }
  for (const child of children) {
    if (child === null || child === undefined) continue;
    el.append(child instanceof Node ? child : document.createTextNode(child));
  }
  return el;
}

export function planCard(
  plan: PlanView,
  opts: {
    onAccept?: () => void;
    onModify?: () => void;
    acceptLabel?: string;
  } = {},
): HTMLElement {
  const rows = plan.changes.map((c) =>
    h(
      'tr',
      { class: 'change-row', 'data-feature': c.feature },
      h('td', {}, c.display_name),
      h('td', { class: 'current' }, String(c.current)),
      h('td', { class: 'arrow' }, '→'),
      h('td', { class: 'target' }, String(c.target)),
    ),
  );
  const buttons: HTMLElement[] = [];
  if (opts.onAccept) {
    buttons.push(
      h('button', { class: 'accept', onclick: () => opts.onAccept!() },
        opts.acceptLabel ?? 'Accept this plan'),
    );
  }
  if (opts.onModify) {
    buttons.push(
      h('button', { class: 'modify', onclick: () => opts.onModify!() }, 'Modify'),
    );
  }
  return h(
    'section',
    { class: 'plan-card', 'data-plan-id': plan.plan_id },
    h('header', {}, `Plan ${plan.plan_id}`),
    h('table', { class: 'changes' }, ...rows),
    h('footer', { class: 'cost' }, `Estimated effort: ${plan.cost_estimate.toFixed(4)}`),
    h('div', { class: 'actions' }, ...buttons),
  );
}

export function likertControl(
  name: string,
  labels: Record<string, string>,
  onSelect: (value: number) => void,
): HTMLElement {
  const items = [1, 2, 3, 4, 5].map((v) =>
    h(
      'label',
      { class: 'likert-item' },
      h('input', {
        type: 'radio',
        name,
        value: String(v),
        onchange: () => onSelect(v),
      }),
      labels[String(v)] ?? String(v),
    ),
  );
  return h('div', { class: 'likert', 'data-name': name }, ...items);
}

export function rangeEditor(
  feature: FeatureView,
  onChange: (lo: number, hi: number) => void,
): HTMLElement {
  const dom = feature.numeric!;
  const lo = h('input', {
    type: 'range', class: 'range-lo', min: String(dom.min),
    max: String(dom.max), step: String(dom.step), value: String(dom.min),
  }) as HTMLInputElement;
  const hi = h('input', {
    type: 'range', class: 'range-hi', min: String(dom.min),
    max: String(dom.max), step: String(dom.step), value: String(dom.max),
  }) as HTMLInputElement;
  const note = h('span', { class: 'range-note' },
    `${dom.min}–${dom.max}${dom.unit ? ' ' + dom.unit : ''}`);
  const fire = () => onChange(Number(lo.value), Number(hi.value));
  lo.addEventListener('change', fire);
  hi.addEventListener('change', fire);
  return h('div', { class: 'range-editor', 'data-feature': feature.name },
    h('span', {}, 'Acceptable range:'), lo, hi, note);
}

export function optionChecklist(
  feature: FeatureView,
  onChange: (selected: string[]) => void,
): HTMLElement {
  const boxes: HTMLInputElement[] = [];
  const items = (feature.options ?? []).map((opt) => {
    const box = h('input', {
      type: 'checkbox', value: opt, checked: 'checked',
    }) as HTMLInputElement;
    boxes.push(box);
    box.addEventListener('change', () =>
      onChange(boxes.filter((b) => b.checked).map((b) => b.value)),
    );
    return h('label', { class: 'option-item' }, box, opt);
  });
  return h('div', { class: 'option-checklist', 'data-feature': feature.name },
    h('span', {}, 'Acceptable options:'), ...items);
}
