// @vitest-environment happy-dom
/**
 * Scripted browser sessions against a locally running service.
 *
 * The test builds the study-scale demo assets (104 features, 31 actionable),
 * starts the HTTP service as a child process, and drives the real rendered
 * DOM: one guided session (propose -> rate -> achievability -> regenerate ->
 * accept) and one exploratory session (two plans -> constrain an undisclosed
 * feature -> regenerate -> accept). The accepted plan shown in the UI must
 * equal the server's final record.
 */
import { spawn, spawnSync, type ChildProcess } from 'node:child_process';
import { mkdtempSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { renderApp } from '../src/main';
import { AppStore } from '../src/state';
import { ApiClient } from '../src/api';

const PORT = 8791;
const BASE = `http://127.0.0.1:${PORT}`;
const PYTHON = process.env.PYTHON ?? 'python3';

let server: ChildProcess | null = null;

async function until(cond: () => boolean, ms = 30000): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > ms) throw new Error('timed out waiting');
    await new Promise((r) => setTimeout(r, 30));
  }
}

async function serverReady(): Promise<void> {
  const start = Date.now();
  for (;;) {
    try {
      const res = await fetch(`${BASE}/schema`);
      if (res.ok) return;
    } catch {
      /* not up yet */
    }
    if (Date.now() - start > 120000) throw new Error('server never came up');
    await new Promise((r) => setTimeout(r, 250));
  }
}

class Screen {
  root: HTMLElement;
  store: AppStore;
  renders = 0;

  constructor() {
    this.root = document.createElement('div');
    document.body.append(this.root);
    this.store = new AppStore(new ApiClient(BASE), () => {
      this.renders += 1;
      this.root.replaceChildren(renderApp(this.store));
    });
  }

  click(selector: string): void {
    const el = this.root.querySelector(selector) as HTMLElement | null;
    if (!el) throw new Error(`nothing matches ${selector}`);
    el.click();
  }

  text(): string {
    return this.root.textContent ?? '';
  }

  async settled(fn: () => void | Promise<void>, cond: () => boolean): Promise<void> {
    await fn();
    await until(cond);
  }
}

beforeAll(async () => {
  const assets = mkdtempSync(join(tmpdir(), 'replan-e2e-'));
  const init = spawnSync(
    PYTHON,
    ['-m', 'replan.cli', 'init-demo', '--out', assets, '--scale', 'study',
     '--port', String(PORT)],
    { stdio: 'inherit', timeout: 300000 },
  );
  if (init.status !== 0) throw new Error('init-demo failed');
  server = spawn(
    PYTHON,
    ['-m', 'replan.cli', 'serve', '--config', join(assets, 'config.json')],
    { stdio: 'ignore' },
  );
  await serverReady();
}, 400000);

afterAll(() => {
  server?.kill('SIGTERM');
});

describe('guided end-to-end', () => {
  it('completes rate -> achievability -> regenerate -> accept', async () => {
    const s = new Screen();
    await s.store.bootstrap();
    await until(() => s.store.personas.length === 2);

    const persona = s.store.personas[0].name;
    await s.store.startSession('guided', persona);
    await until(() => s.store.view?.phase === 'proposed');
    expect(s.root.querySelectorAll('.plan-card').length).toBe(1);

    // step into rating, pick "Good", submit
    s.click('button.next');
    const radio = s.root.querySelector(
      'input[type=radio][value="4"]',
    ) as HTMLInputElement;
    radio.checked = true;
    radio.dispatchEvent(new Event('change'));
    await s.settled(
      () => s.click('button.submit-rating'),
      () => s.store.view?.phase === 'awaiting_feedback',
    );

    // achievability rows exist exactly for the proposed features
    const proposed = new Set(
      s.store.view!.plans.flatMap((p) => p.changes.map((c) => c.feature)),
    );
    const rows = [...s.root.querySelectorAll('.achievability-row')].map(
      (r) => r.getAttribute('data-feature'),
    );
    expect(new Set(rows)).toEqual(proposed);

    // mark the first change "Difficult" and save
    const first = rows[0]!;
    const diffRadio = s.root.querySelector(
      `input[name="achievability-${first}"][value="2"]`,
    ) as HTMLInputElement;
    diffRadio.checked = true;
    diffRadio.dispatchEvent(new Event('change'));
    await s.settled(
      () => s.click('button.submit-constraints'),
      () => s.store.guided.step === 'decision',
    );
    expect(s.store.view!.constraints[first]?.multiplier).toBe(2.0);

    // ask for a new plan, then accept it
    await s.settled(
      () => s.click('button.regenerate'),
      () => s.store.guided.step === 'proposal' && s.store.view!.round === 1,
    );
    expect(s.store.view!.phase).toBe('proposed');
    const planShown = s.store.view!.plans[0];
    s.click('button.next');
    const ok = s.root.querySelector(
      'input[type=radio][value="5"]',
    ) as HTMLInputElement;
    ok.checked = true;
    ok.dispatchEvent(new Event('change'));
    await s.settled(
      () => s.click('button.submit-rating'),
      () => s.store.guided.step === 'achievability',
    );
    await s.settled(
      () => s.click('button.skip'),
      () => s.store.guided.step === 'decision',
    );
    await s.settled(
      () => s.click('button.accept'),
      () => s.store.record !== null,
    );

    // the accepted plan in the UI equals the server's final record
    const record = s.store.record!;
    expect(record.plan.plan_id).toBe(planShown.plan_id);
    expect(record.plan.changes).toEqual(planShown.changes);
    expect(s.store.view!.accepted_plan_id).toBe(planShown.plan_id);
    expect(s.text()).toContain('Plan accepted');
    const kinds = record.events.map((e) => e.kind);
    expect(kinds[0]).toBe('SessionStarted');
    expect(kinds[kinds.length - 1]).toBe('PlanAccepted');
    expect(kinds).toContain('RatingSubmitted');
    expect(kinds).toContain('ConstraintsSubmitted');
  }, 120000);
});

describe('exploratory end-to-end', () => {
  it('shows 2 plans, constrains an undisclosed feature, regenerates, accepts', async () => {
    const s = new Screen();
    await s.store.bootstrap();
    await until(() => s.store.personas.length === 2);

    await s.store.startSession('exploratory', s.store.personas[1].name);
    await until(() => s.store.view?.phase === 'proposed');
    expect(s.root.querySelectorAll('.plan-card').length).toBe(2);

    // progressive disclosure: all 31 actionable features become editable
    s.click('button.panel-toggle');
    await until(() => s.root.querySelectorAll('.feature-row').length > 0);
    const rows = s.root.querySelectorAll('.feature-row');
    expect(rows.length).toBe(31);

    // pick an actionable feature not present in any shown plan
    const shown = new Set(
      s.store.view!.plans.flatMap((p) => p.changes.map((c) => c.feature)),
    );
    const target = [...rows]
      .map((r) => r.getAttribute('data-feature')!)
      .find((name) => !shown.has(name))!;
    s.click(`.feature-row[data-feature="${target}"] button.feature-toggle`);
    await until(
      () => s.root.querySelector(
        `.feature-row[data-feature="${target}"] select`,
      ) !== null,
    );
    const select = s.root.querySelector(
      `.feature-row[data-feature="${target}"] select`,
    ) as HTMLSelectElement;
    select.value = '1';  // very difficult
    select.dispatchEvent(new Event('change'));
    await s.settled(
      () => s.click('button.submit-constraints'),
      () => s.store.view!.constraints[target]?.multiplier === 4.0,
    );

    await s.settled(
      () => s.click('button.regenerate'),
      () => s.store.view!.round === 1,
    );
    expect(s.store.view!.phase).toBe('proposed');

    const planShown = s.store.view!.plans[0];
    await s.settled(
      () => s.click(`.plan-card[data-plan-id="${planShown.plan_id}"] button.accept`),
      () => s.store.record !== null,
    );
    const record = s.store.record!;
    expect(record.plan.plan_id).toBe(planShown.plan_id);
    expect(record.plan.changes).toEqual(planShown.changes);
    expect(s.store.view!.accepted_plan_id).toBe(planShown.plan_id);
    const kinds = record.events.map((e) => e.kind);
    expect(kinds).toContain('FeatureDisclosed');
  }, 120000);
});
