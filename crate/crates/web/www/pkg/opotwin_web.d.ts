/* tslint:disable */
/* eslint-disable */

/**
 * Noise-free walk lock on the cavity transmission with a drifting laser.
 */
export class LockWalk {
    free(): void;
    [Symbol.dispose](): void;
    kick(mhz: number): void;
    constructor(start_mhz: number);
    step(windows: number, drift_mhz_per_s: number): Float64Array;
    readonly time_s: number;
    readonly transmission: number;
}

export function default_efficiency(): number;

export function squeezing_spectrum(pump_w: number, eta: number, filter: number, max_mhz: number, points: number): Float64Array;

export function threshold_w(): number;

export function tuning_landscape(active_c: number, span_sum: number, span_diff: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_lockwalk_free: (a: number, b: number) => void;
    readonly default_efficiency: () => number;
    readonly lockwalk_kick: (a: number, b: number) => void;
    readonly lockwalk_new: (a: number) => [number, number, number];
    readonly lockwalk_step: (a: number, b: number, c: number) => [number, number, number, number];
    readonly lockwalk_time_s: (a: number) => number;
    readonly lockwalk_transmission: (a: number) => number;
    readonly squeezing_spectrum: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly threshold_w: () => number;
    readonly tuning_landscape: (a: number, b: number, c: number, d: number) => [number, number];
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
