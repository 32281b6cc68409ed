/* tslint:disable */
/* eslint-disable */

/**
 * Alias matrix of the interactions `x_lead x_j` against the main effects
 * for a paired design of `budget` rows, or the full design when `full`.
 */
export function alias(p: number, budget: number, lead: number, full: boolean, seed: number): string;

/**
 * Shapley values of a builtin model at `target` (comma separated) under the
 * four reference baselines: standard normal, correlated normal, a local
 * normal around the target and the origin.
 */
export function explain(model: string, target: string, n: number, seed: number): string;

/**
 * First-order and total Sobol indices of a builtin model under U(0,1)^3.
 */
export function sobol(model: string, n: number, seed: number, epsilon: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly alias: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly explain: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly sobol: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
