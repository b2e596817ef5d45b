// Typed client for the tuning-service JSON API. All server communication in
// the UI flows through this module.

export type Condition = "control" | "alignment";

export interface SessionSummary {
    id: string;
    condition: Condition;
    gamma: number;
    created_at: string;
    num_pairs: number;
    num_display_pairs: number;
    num_scoring_pairs: number;
    dim: number;
    iteration_count: number;
    train_count: number;
}

export interface PairEvaluation {
    left: string;
    right: string;
    left_return: number;
    right_return: number;
    induced: number;
    human: number;
    agreement: boolean;
}

export interface IterationResponse {
    index: number;
    weights: number[];
    accuracy: number;
    submitted_at: string;
    per_pair: PairEvaluation[];
    tac?: number;
    warning?: string;
}

export interface HistoryEntry {
    index: number;
    accuracy: number;
    submitted_at: string;
    tac?: number;
    warning?: string;
}

export interface TrainResponse {
    index: number;
    weights: number[];
    tac: number;
    accuracy: number;
    loss: number;
    stopped_at_epoch: number;
    stop_reason: string;
    submitted_at: string;
    machine_generated: boolean;
    grid_cell: [number, number] | null;
}

export interface PairSummary {
    index: number;
    left: string;
    right: string;
    label: number;
    left_length: number;
    right_length: number;
    left_feature_totals: number[];
    right_feature_totals: number[];
    left_sparkline?: number[];
    right_sparkline?: number[];
}

export interface TrainRequest {
    config: Record<string, unknown>;
    grid_learning_rates?: number[];
    grid_batch_sizes?: number[];
}

export class ServiceError extends Error {
    constructor(
        public readonly code: string,
        message: string,
        public readonly detail: string = "",
        public readonly status: number = 0,
    ) {
        super(message);
    }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
    constructor(
        private readonly baseUrl: string,
        private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
    ) {}

    private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
        let response: Response;
        try {
            response = await this.fetchFn(`${this.baseUrl}${path}`, {
                method,
                headers: body !== undefined ? { "content-type": "application/json" } : undefined,
                body: body !== undefined ? JSON.stringify(body) : undefined,
            });
        } catch (err) {
            throw new ServiceError("network", `service unreachable: ${String(err)}`);
        }
        const text = await response.text();
        let payload: unknown = null;
        if (text) {
            try {
                payload = JSON.parse(text);
            } catch {
                throw new ServiceError("bad-response", "service returned non-JSON", text, response.status);
            }
        }
        if (!response.ok) {
            const err = payload as { code?: string; message?: string; detail?: string } | null;
            throw new ServiceError(
                err?.code ?? "http-error",
                err?.message ?? `HTTP ${response.status}`,
                err?.detail ?? "",
                response.status,
            );
        }
        return payload as T;
    }

    getSession(id: string): Promise<SessionSummary> {
        return this.request("GET", `/sessions/${id}`);
    }

    evaluate(id: string, weights: number[]): Promise<IterationResponse> {
        return this.request("POST", `/sessions/${id}/evaluate`, { weights });
    }

    history(id: string): Promise<HistoryEntry[]> {
        return this.request("GET", `/sessions/${id}/history`);
    }

    train(id: string, body: TrainRequest): Promise<TrainResponse> {
        return this.request("POST", `/sessions/${id}/train`, body);
    }

    pairs(id: string, weights?: number[]): Promise<PairSummary[]> {
        const query = weights ? `?weights=${encodeURIComponent(weights.join(","))}` : "";
        return this.request("GET", `/sessions/${id}/pairs${query}`);
    }
}
