import type {
  ConstraintPatch,
  FinalRecord,
  PersonaView,
  SchemaView,
  SessionView,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, {
    headers: { 'Content-Type': 'application/json' },
    ...init,
  });
  const body = await res.json().catch(() => ({}));
  if (!res.ok) {
    const detail =
      typeof body === 'object' && body !== null && 'detail' in body
        ? JSON.stringify((body as { detail: unknown }).detail)
        : res.statusText;
    throw new ApiError(res.status, detail);
  }
  return body as T;
}

export class ApiClient {
  constructor(private readonly base: string = '') {}

  getSchema(): Promise<SchemaView> {
    return request(`${this.base}/schema`);
  }

  getPersonas(): Promise<PersonaView[]> {
    return request(`${this.base}/personas`);
  }

  createSession(
    mode: 'guided' | 'exploratory',
    personaName: string,
  ): Promise<SessionView> {
    return request(`${this.base}/sessions`, {
      method: 'POST',
      body: JSON.stringify({ mode, persona_name: personaName }),
    });
  }

  getSession(id: string): Promise<SessionView> {
    return request(`${this.base}/sessions/${id}`);
  }

  submitRating(id: string, planId: string, likert: number): Promise<SessionView> {
    return request(`${this.base}/sessions/${id}/rating`, {
      method: 'POST',
      body: JSON.stringify({ plan_id: planId, likert }),
    });
  }

  submitConstraints(
    id: string,
    patches: Record<string, ConstraintPatch>,
  ): Promise<SessionView> {
    return request(`${this.base}/sessions/${id}/constraints`, {
      method: 'POST',
      body: JSON.stringify(patches),
    });
  }

  regenerate(id: string): Promise<SessionView> {
    return request(`${this.base}/sessions/${id}/regenerate`, {
      method: 'POST',
    });
  }

  accept(id: string, planId: string): Promise<FinalRecord> {
    return request(`${this.base}/sessions/${id}/accept`, {
      method: 'POST',
      body: JSON.stringify({ plan_id: planId }),
    });
  }
}
