// UI state and the pure logic behind it: weight parsing/validation, the
// log-scale slider mapping, and history bookkeeping. No DOM access here.

import type {
    HistoryEntry,
    IterationResponse,
    PairSummary,
    SessionSummary,
    TrainResponse,
} from "./api.js";

export interface UiSessionState {
    session: SessionSummary;
    featureNames: string[];
    weightInputs: string[];
    inputErrors: (string | null)[];
    latest: IterationResponse | null;
    best: IterationResponse | null;
    history: HistoryEntry[];
    pairs: PairSummary[];
    trainComparison: TrainResponse | null;
    serviceError: string | null;
    pending: boolean;
}

export function initialState(session: SessionSummary, pairs: PairSummary[]): UiSessionState {
    return {
        session,
        featureNames: Array.from({ length: session.dim }, (_, k) => `feature ${k}`),
        weightInputs: Array.from({ length: session.dim }, () => "0"),
        inputErrors: Array.from({ length: session.dim }, () => null),
        latest: null,
        best: null,
        history: [],
        pairs,
        trainComparison: null,
        serviceError: null,
        pending: false,
    };
}

export type WeightParse =
    | { ok: true; weights: number[] }
    | { ok: false; errors: (string | null)[] };

export function parseWeights(inputs: string[]): WeightParse {
    const errors: (string | null)[] = inputs.map(() => null);
    const weights: number[] = [];
    let bad = false;
    inputs.forEach((raw, k) => {
        const text = raw.trim();
        if (text === "") {
            errors[k] = "required";
            bad = true;
            return;
        }
        const value = Number(text);
        if (!Number.isFinite(value)) {
            errors[k] = "not a finite number";
            bad = true;
            return;
        }
        weights[k] = value;
    });
    return bad ? { ok: false, errors } : { ok: true, weights };
}

// Sliders cover the magnitude range 0.01 .. 10000 on a log scale, with the
// left half negative, a zero notch in the middle, and the right half
// positive. Positions are integers in [-100, 100].
const LOG_MIN = -2; // 10^-2 = 0.01
const LOG_MAX = 4; //  10^4 = 10000
const HALF = 100;

export function sliderToWeight(position: number): number {
    if (position === 0) return 0;
    const magnitude = Math.abs(position) / HALF;
    const exponent = LOG_MIN + magnitude * (LOG_MAX - LOG_MIN);
    const value = Math.pow(10, exponent);
    return position > 0 ? value : -value;
}

export function weightToSlider(weight: number): number {
    if (weight === 0 || !Number.isFinite(weight)) return 0;
    const exponent = Math.log10(Math.abs(weight));
    const clamped = Math.min(Math.max(exponent, LOG_MIN), LOG_MAX);
    const magnitude = Math.round(((clamped - LOG_MIN) / (LOG_MAX - LOG_MIN)) * HALF);
    return weight > 0 ? magnitude : -magnitude;
}

export function setInput(state: UiSessionState, index: number, text: string): UiSessionState {
    const weightInputs = state.weightInputs.slice();
    weightInputs[index] = text;
    const parsed = parseWeights(weightInputs);
    return {
        ...state,
        weightInputs,
        inputErrors: parsed.ok ? weightInputs.map(() => null) : parsed.errors,
    };
}

// Only confirmed iterations enter the state: the caller awaits the service
// response before this runs, so there is no optimistic rendering to undo.
export function applyIteration(state: UiSessionState, iteration: IterationResponse): UiSessionState {
    const entry: HistoryEntry = {
        index: iteration.index,
        accuracy: iteration.accuracy,
        submitted_at: iteration.submitted_at,
    };
    if (iteration.tac !== undefined) entry.tac = iteration.tac;
    if (iteration.warning !== undefined) entry.warning = iteration.warning;
    return {
        ...state,
        latest: iteration,
        best: betterIteration(state.best, iteration, state.session.condition === "alignment"),
        history: [...state.history, entry],
        serviceError: null,
        pending: false,
    };
}

// In the alignment condition the best iteration is the highest-scoring one;
// in the control condition the user only sees accuracy, so rank by that.
function betterIteration(
    current: IterationResponse | null,
    candidate: IterationResponse,
    byScore: boolean,
): IterationResponse {
    if (current === null) return candidate;
    if (byScore) {
        const a = current.tac ?? -Infinity;
        const b = candidate.tac ?? -Infinity;
        return b >= a ? candidate : current;
    }
    return candidate.accuracy >= current.accuracy ? candidate : current;
}

export function formatScore(value: number): string {
    return value.toFixed(2);
}
