// Controller: owns the state, talks to the service, re-renders after every
// confirmed response. Nothing is rendered optimistically; an iteration shows
// up only once the service has stored it.

import { ApiClient, ServiceError } from "./api.js";
import type { Handlers } from "./render.js";
import { renderApp } from "./render.js";
import {
    applyIteration,
    initialState,
    parseWeights,
    setInput,
    type UiSessionState,
} from "./state.js";

export class TuningApp {
    private state!: UiSessionState;
    private lastAction: (() => Promise<void>) | null = null;

    constructor(
        private readonly client: ApiClient,
        private readonly sessionId: string,
        private readonly doc: Document,
        private readonly root: HTMLElement,
    ) {}

    async start(): Promise<void> {
        const [session, pairs, history] = await Promise.all([
            this.client.getSession(this.sessionId),
            this.client.pairs(this.sessionId),
            this.client.history(this.sessionId),
        ]);
        this.state = { ...initialState(session, pairs), history };
        this.render();
    }

    get current(): UiSessionState {
        return this.state;
    }

    private render(): void {
        renderApp(this.doc, this.root, this.state, this.handlers());
    }

    private update(next: UiSessionState): void {
        this.state = next;
        this.render();
    }

    private handlers(): Handlers {
        return {
            onInput: (index, text) => this.update(setInput(this.state, index, text)),
            onSlider: (index, position) => {
                // the slider writes into the text field; the field stays the
                // single source of truth for parsing
                const value = sliderText(position);
                this.update(setInput(this.state, index, value));
            },
            onSubmit: () => void this.submitWeights(),
            onAutoTrain: (lossKind) => void this.autoTrain(lossKind),
            onRetry: () => void this.retry(),
        };
    }

    async submitWeights(): Promise<void> {
        const parsed = parseWeights(this.state.weightInputs);
        if (!parsed.ok) {
            this.update({ ...this.state, inputErrors: parsed.errors });
            return;
        }
        const action = async () => {
            this.update({ ...this.state, pending: true, serviceError: null });
            try {
                const iteration = await this.client.evaluate(this.sessionId, parsed.weights);
                this.update(applyIteration(this.state, iteration));
            } catch (err) {
                this.fail(err);
            }
        };
        this.lastAction = action;
        await action();
    }

    async autoTrain(lossKind: string): Promise<void> {
        const action = async () => {
            this.update({ ...this.state, pending: true, serviceError: null });
            try {
                const result = await this.client.train(this.sessionId, {
                    config: { loss_kind: lossKind },
                });
                this.update({ ...this.state, trainComparison: result, pending: false });
            } catch (err) {
                this.fail(err);
            }
        };
        this.lastAction = action;
        await action();
    }

    async retry(): Promise<void> {
        if (this.lastAction !== null) await this.lastAction();
    }

    private fail(err: unknown): void {
        const message =
            err instanceof ServiceError
                ? `${err.code}: ${err.message}`
                : `unexpected error: ${String(err)}`;
        this.update({ ...this.state, serviceError: message, pending: false });
    }
}

function sliderText(position: number): string {
    if (position === 0) return "0";
    const magnitude = Math.pow(10, -2 + (Math.abs(position) / 100) * 6);
    const rounded = Number(magnitude.toPrecision(3));
    return String(position > 0 ? rounded : -rounded);
}
