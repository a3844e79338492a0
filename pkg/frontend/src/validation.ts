/** Client-side mirrors of server validation. These never replace the server
 * checks; they only keep obviously bad payloads from leaving the browser. */

import type { ConstraintPatch, FeatureView } from './types.js';

export function isValidLikert(x: unknown): x is 1 | 2 | 3 | 4 | 5 {
  return typeof x === 'number' && Number.isInteger(x) && x >= 1 && x <= 5;
}

/** Clamp a requested numeric range to the feature's schema domain and order
 * its endpoints. Returns null when the feature has no numeric domain. */
export function clampRange(
  feature: FeatureView,
  lo: number,
  hi: number,
): [number, number] | null {
  if (!feature.numeric) return null;
  const { min, max } = feature.numeric;
  const a = Math.min(lo, hi);
  const b = Math.max(lo, hi);
  return [Math.min(Math.max(a, min), max), Math.min(Math.max(b, min), max)];
}

/** Drop unknown options and refuse empty subsets. */
export function sanitizeOptions(
  feature: FeatureView,
  selected: string[],
): string[] | null {
  if (!feature.options) return null;
  const known = selected.filter((o) => feature.options!.includes(o));
  return known.length > 0 ? known : null;
}

export function buildPatch(
  feature: FeatureView,
  draft: { achievability?: number; lo?: number; hi?: number; options?: string[] },
): ConstraintPatch | null {
  const patch: ConstraintPatch = {};
  if (draft.achievability !== undefined) {
    if (!isValidLikert(draft.achievability)) return null;
    patch.achievability = draft.achievability;
  }
  if (draft.lo !== undefined && draft.hi !== undefined) {
    const range = clampRange(feature, draft.lo, draft.hi);
    if (range) patch.range = range;
  }
  if (draft.options !== undefined) {
    const opts = sanitizeOptions(feature, draft.options);
    if (opts) patch.options = opts;
  }
  return Object.keys(patch).length > 0 ? patch : null;
}
