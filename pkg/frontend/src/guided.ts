/** Guided wizard: Proposal -> Rating -> Achievability -> Decision.
 * Constraint editors exist only for features the current proposal touches. */

import { h, likertControl, optionChecklist, planCard, rangeEditor } from './components.js';
import type { ConstraintPatch, FeatureView, SchemaView, SessionView } from './types.js';
import { buildPatch } from './validation.js';

export type GuidedStep = 'proposal' | 'rating' | 'achievability' | 'decision';

export interface GuidedStepState {
  step: GuidedStep;
  likert: number | null;
  drafts: Record<
    string,
    { achievability?: number; lo?: number; hi?: number; options?: string[] }
  >;
}

export interface GuidedHandlers {
  onAdvance(next: GuidedStep): void;
  onRate(planId: string, likert: number): void;
  onConstraints(patches: Record<string, ConstraintPatch>): void;
  onAccept(planId: string): void;
  onRegenerate(): void;
}

export function newGuidedState(): GuidedStepState {
  return { step: 'proposal', likert: null, drafts: {} };
}

export function proposedFeatures(view: SessionView): string[] {
  const names: string[] = [];
  for (const plan of view.plans) {
    for (const change of plan.changes) {
      if (!names.includes(change.feature)) names.push(change.feature);
    }
  }
  return names;
}

function achievabilityRows(
  view: SessionView,
  schema: SchemaView,
  state: GuidedStepState,
): HTMLElement[] {
  const byName = new Map(schema.features.map((f) => [f.name, f]));
  return proposedFeatures(view).map((name) => {
    const feature = byName.get(name) as FeatureView;
    const draft = (state.drafts[name] ??= {});
    const parts: HTMLElement[] = [
      h('span', { class: 'feature-label' }, feature.display_name),
      likertControl(
        `achievability-${name}`,
        schema.achievability_labels,
        (v) => {
          draft.achievability = v;
        },
      ),
    ];
    if (feature.kind === 'numeric') {
      parts.push(
        rangeEditor(feature, (lo, hi) => {
          draft.lo = lo;
          draft.hi = hi;
        }),
      );
    } else {
      parts.push(
        optionChecklist(feature, (selected) => {
          draft.options = selected;
        }),
      );
    }
    return h('div', { class: 'achievability-row', 'data-feature': name }, ...parts);
  });
}

export function collectPatches(
  view: SessionView,
  schema: SchemaView,
  state: GuidedStepState,
): Record<string, ConstraintPatch> {
  const byName = new Map(schema.features.map((f) => [f.name, f]));
  const out: Record<string, ConstraintPatch> = {};
  for (const [name, draft] of Object.entries(state.drafts)) {
    const feature = byName.get(name);
    if (!feature) continue;
    const patch = buildPatch(feature, draft);
    if (patch) out[name] = patch;
  }
  return out;
}

export function renderGuidedWizard(
  view: SessionView,
  schema: SchemaView,
  state: GuidedStepState,
  handlers: GuidedHandlers,
): HTMLElement {
  const root = h('div', { class: 'guided-wizard', 'data-step': state.step });

  if (view.phase === 'accepted') {
    root.append(
      h('h2', {}, 'Plan accepted'),
      h('p', { class: 'final-note' },
        `Final plan ${view.accepted_plan_id}; effort ${view.final_cost?.toFixed(4)}`),
    );
    return root;
  }
  if (view.phase === 'exhausted') {
    root.append(
      h('h2', {}, 'No further plans'),
      h('p', {}, 'The current constraints leave no way to overturn the decision.'),
    );
    return root;
  }

  const plan = view.plans[0];
  if (state.step === 'proposal') {
    root.append(
      h('h2', {}, `Round ${view.round + 1}: suggested changes`),
      planCard(plan),
      h('button', { class: 'next', onclick: () => handlers.onAdvance('rating') },
        'Rate this plan'),
    );
  } else if (state.step === 'rating') {
    root.append(
      h('h2', {}, 'How good is this plan for you?'),
      planCard(plan),
      likertControl('plan-rating', schema.rating_labels, (v) => {
        state.likert = v;
      }),
      h('button', {
        class: 'submit-rating',
        onclick: () => {
          if (state.likert !== null) handlers.onRate(plan.plan_id, state.likert);
        },
      }, 'Submit rating'),
    );
  } else if (state.step === 'achievability') {
    root.append(
      h('h2', {}, 'How achievable is each change?'),
      ...achievabilityRows(view, schema, state),
      h('button', {
        class: 'submit-constraints',
        onclick: () => handlers.onConstraints(collectPatches(view, schema, state)),
      }, 'Save preferences'),
      h('button', { class: 'skip', onclick: () => handlers.onAdvance('decision') },
        'Skip'),
    );
  } else {
    root.append(
      h('h2', {}, 'Accept this plan or ask for a new one'),
      planCard(plan),
      h('div', { class: 'decision' },
        h('button', { class: 'accept', onclick: () => handlers.onAccept(plan.plan_id) },
          'Accept plan'),
        h('button', { class: 'regenerate', onclick: () => handlers.onRegenerate() },
          'Generate a new plan'),
      ),
    );
  }
  return root;
}
