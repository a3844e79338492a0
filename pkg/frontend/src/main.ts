import { ApiClient } from './api.js';
import { h } from './components.js';
import { renderGuidedWizard } from './guided.js';
import { renderExploratoryBoard } from './exploratory.js';
import { AppStore } from './state.js';

function renderStart(store: AppStore): HTMLElement {
  const root = h('div', { class: 'start-screen' },
    h('h1', {}, 'Loan decision assistant'),
    h('p', {}, 'Pick a persona and an interaction style to begin.'));
  for (const persona of store.personas) {
    root.append(
      h('section', { class: 'persona-card' },
        h('h3', {}, persona.name),
        h('p', {}, persona.narrative),
        h('button', {
          class: 'start-guided',
          onclick: () => void store.startSession('guided', persona.name),
        }, 'Guided session'),
        h('button', {
          class: 'start-exploratory',
          onclick: () => void store.startSession('exploratory', persona.name),
        }, 'Exploratory session'),
      ),
    );
  }
  return root;
}

export function renderApp(store: AppStore): HTMLElement {
  const root = h('div', { class: 'app' });
  if (store.error) {
    root.append(h('div', { class: 'error-banner', role: 'alert' }, store.error));
  }
  if (!store.view) {
    root.append(renderStart(store));
    return root;
  }
  const view = store.view;
  const schema = store.schema!;
  if (view.mode === 'guided') {
    root.append(
      renderGuidedWizard(view, schema, store.guided, {
        onAdvance: (step) => store.advanceGuided(step),
        onRate: (planId, likert) => void store.rate(planId, likert),
        onConstraints: (patches) => void store.sendConstraints(patches),
        onAccept: (planId) => void store.accept(planId),
        onRegenerate: () => void store.regenerate(),
      }),
    );
  } else {
    root.append(
      renderExploratoryBoard(view, schema, store.exploratory, {
        onTogglePanel: () => store.togglePanel(),
        onExpandFeature: (name) => store.expandFeature(name),
        onConstraints: (patches) => void store.sendConstraints(patches),
        onAccept: (planId) => void store.accept(planId),
        onRegenerate: () => void store.regenerate(),
      }),
    );
  }
  return root;
}

export function mount(target: HTMLElement, baseUrl = ''): AppStore {
  const store = new AppStore(new ApiClient(baseUrl), () => {
    target.replaceChildren(renderApp(store));
  });
  void store.bootstrap();
  return store;
}

declare global {
  interface Window {
    replanStore?: AppStore;
  }
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  window.replanStore = mount(document.getElementById('app')!);
}
