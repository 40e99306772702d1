/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_lockwalk_free: (a: number, b: number) => void;
export const default_efficiency: () => number;
export const lockwalk_kick: (a: number, b: number) => void;
export const lockwalk_new: (a: number) => [number, number, number];
export const lockwalk_step: (a: number, b: number, c: number) => [number, number, number, number];
export const lockwalk_time_s: (a: number) => number;
export const lockwalk_transmission: (a: number) => number;
export const squeezing_spectrum: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const threshold_w: () => number;
export const tuning_landscape: (a: number, b: number, c: number, d: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
