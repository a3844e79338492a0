/** Application store. Holds the latest server view plus per-mode UI state;
 * every mutation round-trips through the API and re-renders from the
 * response (no optimistic updates). */

import { ApiClient, ApiError } from './api.js';
import {
  GuidedStepState,
  newGuidedState,
} from './guided.js';
import {
  ExploratoryState,
  newExploratoryState,
} from './exploratory.js';
import type {
  ConstraintPatch,
  FinalRecord,
  PersonaView,
  SchemaView,
  SessionView,
} from './types.js';

export class AppStore {
  schema: SchemaView | null = null;
  personas: PersonaView[] = [];
  view: SessionView | null = null;
  record: FinalRecord | null = null;
  error: string | null = null;
  guided: GuidedStepState = newGuidedState();
  exploratory: ExploratoryState = newExploratoryState();

  constructor(
    readonly api: ApiClient,
    private readonly onChange: () => void = () => {},
  ) {}

  private notify(): void {
    this.onChange();
  }

  private async guard<T>(fn: () => Promise<T>): Promise<T | null> {
    try {
      const out = await fn();
      this.error = null;
      return out;
    } catch (err) {
      this.error = err instanceof ApiError ? err.message : String(err);
      this.notify();
      return null;
    }
  }

  async bootstrap(): Promise<void> {
    await this.guard(async () => {
      this.schema = await this.api.getSchema();
      this.personas = await this.api.getPersonas();
    });
    this.notify();
  }

  async startSession(
    mode: 'guided' | 'exploratory',
    personaName: string,
  ): Promise<void> {
    const view = await this.guard(() => this.api.createSession(mode, personaName));
    if (view) {
      this.view = view;
      this.record = null;
      this.guided = newGuidedState();
      this.exploratory = newExploratoryState();
    }
    this.notify();
  }

  async rate(planId: string, likert: number): Promise<void> {
    if (!this.view) return;
    const view = await this.guard(() =>
      this.api.submitRating(this.view!.session_id, planId, likert),
    );
    if (view) {
      this.view = view;
      this.guided.step = 'achievability';
    }
    this.notify();
  }

  async sendConstraints(patches: Record<string, ConstraintPatch>): Promise<void> {
    if (!this.view) return;
    if (Object.keys(patches).length > 0) {
      const view = await this.guard(() =>
        this.api.submitConstraints(this.view!.session_id, patches),
      );
      if (view) this.view = view;
    }
    if (this.view.mode === 'guided') this.guided.step = 'decision';
    this.notify();
  }

  async regenerate(): Promise<void> {
    if (!this.view) return;
    const view = await this.guard(() =>
      this.api.regenerate(this.view!.session_id),
    );
    if (view) {
      this.view = view;
      this.guided = newGuidedState();
      this.exploratory.drafts = {};
    }
    this.notify();
  }

  async accept(planId: string): Promise<void> {
    if (!this.view) return;
    const record = await this.guard(() =>
      this.api.accept(this.view!.session_id, planId),
    );
    if (record) {
      this.record = record;
      const refreshed = await this.guard(() =>
        this.api.getSession(this.view!.session_id),
      );
      if (refreshed) this.view = refreshed;
    }
    this.notify();
  }

  advanceGuided(step: GuidedStepState['step']): void {
    this.guided.step = step;
    this.notify();
  }

  togglePanel(): void {
    this.exploratory.panelOpen = !this.exploratory.panelOpen;
    this.notify();
  }

  expandFeature(name: string): void {
    if (this.exploratory.expanded.has(name)) {
      this.exploratory.expanded.delete(name);
    } else {
      this.exploratory.expanded.add(name);
    }
    this.notify();
  }
}
