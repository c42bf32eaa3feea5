/** Typed client for the audit service's HTTP API. */

export interface ItemSummary {
  item_id: string;
  sentence_id: string;
  status: ItemStatus;
  version: number;
  preview: string;
  disagreement_count: number;
}

export type ItemStatus = "pending" | "one_decision" | "conflicted" | "resolved";

export interface Decision {
  auditor_id: string;
  tags: string[];
  ts: number;
}

export interface AuditItem {
  item_id: string;
  sentence_id: string;
  tokens: string[];
  stored_tags: string[];
  predicted_tags: string[];
  status: ItemStatus;
  version: number;
  decisions: Decision[];
  resolution: string[] | null;
  escalated: boolean;
}

export interface IterationReport {
  iteration: number;
  dev_metrics: Record<string, unknown> | null;
  disagreement_count: number;
  disagreement_rate: number;
  audited_count: number;
  converged: boolean;
}

/** A structured error the server rejected the request with (4xx/5xx). */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init); // network failures propagate as TypeError
  const body = await response.json().catch(() => null);
  if (!response.ok) {
    const error = (body as { error?: { code?: string; message?: string } } | null)?.error;
    throw new ApiError(
      response.status,
      error?.code ?? "UnknownError",
      error?.message ?? `request failed with status ${response.status}`,
    );
  }
  return body as T;
}

export class AuditApi {
  constructor(private readonly base: string = "") {}

  async queue(status?: ItemStatus): Promise<ItemSummary[]> {
    const suffix = status ? `?status=${encodeURIComponent(status)}` : "";
    const payload = await request<{ items: ItemSummary[] }>(`${this.base}/api/queue${suffix}`);
    return payload.items;
  }

  item(id: string): Promise<AuditItem> {
    return request<AuditItem>(`${this.base}/api/item/${encodeURIComponent(id)}`);
  }

  /** Post one auditor's decision; `version` enables optimistic concurrency. */
  submitDecision(
    id: string,
    auditorId: string,
    tags: readonly string[],
    version?: number,
  ): Promise<AuditItem> {
    return request<AuditItem>(`${this.base}/api/item/${encodeURIComponent(id)}/decision`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ auditor_id: auditorId, tags, version }),
    });
  }

  async progress(): Promise<IterationReport[]> {
    const payload = await request<{ reports: IterationReport[] }>(`${this.base}/api/progress`);
    return payload.reports;
  }

  iterate(): Promise<IterationReport> {
    return request<IterationReport>(`${this.base}/api/iterate`, { method: "POST" });
  }
}
