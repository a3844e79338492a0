/** Exploratory board: several plan cards plus a modify panel that starts
 * collapsed and progressively discloses every actionable feature. */

import { h, optionChecklist, planCard, rangeEditor } from './components.js';
import type { ConstraintPatch, SchemaView, SessionView } from './types.js';
import { buildPatch } from './validation.js';

export interface ExploratoryState {
  panelOpen: boolean;
  expanded: Set<string>;
  drafts: Record<
    string,
    { achievability?: number; lo?: number; hi?: number; options?: string[] }
  >;
}

export interface ExploratoryHandlers {
  onTogglePanel(): void;
  onExpandFeature(name: string): void;
  onConstraints(patches: Record<string, ConstraintPatch>): void;
  onAccept(planId: string): void;
  onRegenerate(): void;
}

export function newExploratoryState(): ExploratoryState {
  return { panelOpen: false, expanded: new Set(), drafts: {} };
}

export function collectExploratoryPatches(
  schema: SchemaView,
  state: ExploratoryState,
): Record<string, ConstraintPatch> {
  const byName = new Map(schema.features.map((f) => [f.name, f]));
  const out: Record<string, ConstraintPatch> = {};
  for (const [name, draft] of Object.entries(state.drafts)) {
    const feature = byName.get(name);
    if (!feature || !feature.actionable) continue;
    const patch = buildPatch(feature, draft);
    if (patch) out[name] = patch;
  }
  return out;
}

function achievabilitySelect(
  name: string,
  labels: Record<string, string>,
  onPick: (v: number) => void,
): HTMLElement {
  const select = h('select', { class: 'achievability-select' }) as HTMLSelectElement;
  select.append(h('option', { value: '' }, '(unchanged)'));
  for (const v of [1, 2, 3, 4, 5]) {
    select.append(h('option', { value: String(v) }, labels[String(v)] ?? String(v)));
  }
  select.addEventListener('change', () => {
    if (select.value) onPick(Number(select.value));
  });
  return h('label', { class: 'achievability', 'data-feature': name },
    'Difficulty: ', select);
}

function featureRow(
  schema: SchemaView,
  name: string,
  state: ExploratoryState,
  handlers: ExploratoryHandlers,
): HTMLElement {
  const feature = schema.features.find((f) => f.name === name)!;
  const expanded = state.expanded.has(name);
  const row = h('div', {
    class: `feature-row${expanded ? ' expanded' : ''}`,
    'data-feature': name,
  });
  row.append(
    h('button', {
      class: 'feature-toggle',
      onclick: () => handlers.onExpandFeature(name),
    }, feature.display_name),
  );
  if (expanded) {
    const draft = (state.drafts[name] ??= {});
    row.append(
      achievabilitySelect(name, schema.achievability_labels, (v) => {
        draft.achievability = v;
      }),
    );
    if (feature.kind === 'numeric') {
      row.append(rangeEditor(feature, (lo, hi) => {
        draft.lo = lo;
        draft.hi = hi;
      }));
    } else {
      row.append(optionChecklist(feature, (selected) => {
        draft.options = selected;
      }));
    }
  }
  return row;
}

export function renderExploratoryBoard(
  view: SessionView,
  schema: SchemaView,
  state: ExploratoryState,
  handlers: ExploratoryHandlers,
): HTMLElement {
  const root = h('div', { class: 'exploratory-board' });

  if (view.phase === 'accepted') {
    root.append(
      h('h2', {}, 'Plan accepted'),
      h('p', { class: 'final-note' },
        `Final plan ${view.accepted_plan_id}; effort ${view.final_cost?.toFixed(4)}`),
    );
    return root;
  }
  if (view.phase === 'exhausted') {
    root.append(h('h2', {}, 'No plan satisfies the current constraints'));
    return root;
  }

  root.append(h('h2', {}, `Round ${view.round + 1}: candidate plans`));
  const cards = h('div', { class: 'plan-cards' });
  for (const plan of view.plans) {
    cards.append(
      planCard(plan, {
        onAccept: () => handlers.onAccept(plan.plan_id),
        onModify: () => handlers.onTogglePanel(),
      }),
    );
  }
  root.append(cards);

  const actionable = schema.features.filter((f) => f.actionable);
  const panel = h('div', {
    class: `modify-panel${state.panelOpen ? ' open' : ' collapsed'}`,
  });
  panel.append(
    h('button', { class: 'panel-toggle', onclick: () => handlers.onTogglePanel() },
      state.panelOpen
        ? 'Hide feature list'
        : `Show all ${actionable.length} adjustable features`),
  );
  if (state.panelOpen) {
    const rows = h('div', { class: 'feature-rows' });
    for (const f of actionable) rows.append(featureRow(schema, f.name, state, handlers));
    panel.append(
      rows,
      h('button', {
        class: 'submit-constraints',
        onclick: () =>
          handlers.onConstraints(collectExploratoryPatches(schema, state)),
      }, 'Apply constraints'),
    );
  }
  root.append(
    panel,
    h('button', { class: 'regenerate', onclick: () => handlers.onRegenerate() },
      'Generate new plans'),
  );
  return root;
}
