/** Shapes returned by the session service. The UI renders these verbatim:
 * every cost, plan and phase on screen originates from the server. */

export type Value = number | string;

export interface ChangeView {
  feature: string;
  display_name: string;
  current: Value;
  target: Value;
  description: string;
}

export interface PlanView {
  plan_id: string;
  cost_estimate: number;
  changes: ChangeView[];
}

export interface FeatureConstraintView {
  multiplier?: number | null;
  range?: [number, number] | null;
  options?: string[] | null;
}

export interface SessionView {
  session_id: string;
  mode: 'guided' | 'exploratory';
  submode: 'rate' | 'choice';
  phase: string;
  round: number;
  plans: PlanView[];
  constraints: Record<string, FeatureConstraintView>;
  accepted_plan_id?: string | null;
  final_cost?: number | null;
}

export interface NumericDomainView {
  min: number;
  max: number;
  step: number;
  unit: string;
}

export interface FeatureView {
  name: string;
  display_name: string;
  kind: 'numeric' | 'categorical';
  actionable: boolean;
  numeric?: NumericDomainView | null;
  options?: string[] | null;
}

export interface SchemaView {
  version: string;
  features: FeatureView[];
  rating_labels: Record<string, string>;
  achievability_labels: Record<string, string>;
}

export interface PersonaView {
  name: string;
  narrative: string;
  profile: Record<string, Value>;
}

export interface EventView {
  seq: number;
  timestamp: string;
  kind: string;
  payload: Record<string, unknown>;
}

export interface FinalRecord {
  session_id: string;
  plan: PlanView;
  final_cost: number;
  events: EventView[];
}

export interface ConstraintPatch {
  achievability?: number;
  range?: [number, number];
  options?: string[];
}
