/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_designsummary_free: (a: number, b: number) => void;
export const __wbg_runtraces_free: (a: number, b: number) => void;
export const design: (a: number, b: number, c: number) => [number, number, number];
export const designsummary_drive_torque: (a: number) => number;
export const designsummary_excluded: (a: number) => [number, number];
export const designsummary_im: (a: number) => [number, number];
export const designsummary_re: (a: number) => [number, number];
export const designsummary_riccati_residual: (a: number) => number;
export const designsummary_trim: (a: number) => [number, number];
export const run: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const runtraces_estimate: (a: number, b: number, c: number) => [number, number, number, number];
export const runtraces_plant: (a: number, b: number, c: number) => [number, number, number, number];
export const runtraces_t: (a: number) => [number, number];
export const tire_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
