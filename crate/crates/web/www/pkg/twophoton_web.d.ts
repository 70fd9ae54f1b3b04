/* tslint:disable */
/* eslint-disable */

export function analytic_patterns(a_mm: number, d_mm: number, z_m: number, lambda_nm: number, span_mm: number, points: number): string;

export function hbt_histogram(coherence_time_ns: number, rate1: number, rate2: number, duration_s: number, channel_ns: number, seed: bigint): string;

export function speckle_scan(a_mm: number, d_mm: number, z_m: number, lambda_nm: number, span_mm: number, points: number, realizations: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly analytic_patterns: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly hbt_histogram: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly speckle_scan: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
