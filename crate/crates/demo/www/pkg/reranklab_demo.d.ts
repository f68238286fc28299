/* tslint:disable */
/* eslint-disable */

/**
 * A single simulated query whose page the user reorders by hand. Hidden
 * true quality stands in for the experience score.
 */
export class Page {
    free(): void;
    [Symbol.dispose](): void;
    is_empty(): boolean;
    /**
     * Item labels in current page order.
     */
    labels(): string[];
    len(): number;
    constructor(seed: number, n: number);
    /**
     * Moves the item at `pos` one slot up; no-op at the top.
     */
    promote(pos: number): void;
    /**
     * Sorts by attractiveness, which is what a click-trained ranker learns.
     */
    resetToClicks(eta: number): void;
    resetToIdeal(): void;
    /**
     * `[behavioral, ndcg, total]` for the top `k` of the current page.
     */
    reward(alpha: number, beta: number, eta: number, k: number): Float64Array;
    /**
     * `[true_quality, clickbait]` per item in page order, flattened.
     */
    truths(): Float64Array;
}

/**
 * Examination probability at positions `1..=depth` for bias strength `eta`.
 */
export function examinationCurve(eta: number, depth: number): Float64Array;

/**
 * `P(item i lands at rank t)` under Plackett-Luce, row-major `n x n`
 * (row = item). Exact by enumeration, so `n` is capped at [`MAX_EXACT`].
 */
export function rankMarginals(utilities: Float64Array, tau: number): Float64Array;

/**
 * One Plackett-Luce draw of a full ranking (item indices).
 */
export function sampleRanking(utilities: Float64Array, tau: number, seed: number): Uint32Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_page_free: (a: number, b: number) => void;
    readonly examinationCurve: (a: number, b: number) => [number, number];
    readonly page_is_empty: (a: number) => number;
    readonly page_labels: (a: number) => [number, number];
    readonly page_len: (a: number) => number;
    readonly page_new: (a: number, b: number) => [number, number, number];
    readonly page_promote: (a: number, b: number) => void;
    readonly page_resetToClicks: (a: number, b: number) => void;
    readonly page_resetToIdeal: (a: number) => void;
    readonly page_reward: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly page_truths: (a: number) => [number, number];
    readonly rankMarginals: (a: number, b: number, c: number) => [number, number, number, number];
    readonly sampleRanking: (a: number, b: number, c: number, d: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
