/* tslint:disable */
/* eslint-disable */

/**
 * Trim and observer design at one speed.
 */
export class DesignSummary {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly drive_torque: number;
    /**
     * 1 where the eigenvalue belongs to an unobservable mode left undesigned.
     */
    readonly excluded: Uint8Array;
    readonly im: Float64Array;
    /**
     * Real parts of eig(A − G C).
     */
    readonly re: Float64Array;
    readonly riccati_residual: number;
    /**
     * Extended trim state, 14 entries.
     */
    readonly trim: Float64Array;
}

/**
 * Plant and estimate traces of one run, decimated for plotting.
 */
export class RunTraces {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Observer estimate of the same channel.
     */
    estimate(channel: string): Float64Array;
    /**
     * Plant channel by name (`vx`, `dthf`, `Frx`, ...).
     */
    plant(channel: string): Float64Array;
    readonly t: Float64Array;
}

/**
 * Trims at `speed_kph` and designs the observer with `Q_w = q_scale I` and
 * the IMU measurement weights scaled by `r_scale`.
 */
export function design(speed_kph: number, q_scale: number, r_scale: number): DesignSummary;

/**
 * Straight-running plant at `plant_kph` started `vx_offset` m/s off trim,
 * observed by a design at `observer_kph`; noisy sensors when `noise` is set.
 */
export function run(plant_kph: number, observer_kph: number, vx_offset: number, rider_mass_scale: number, duration: number, noise: boolean): RunTraces;

/**
 * Steady-state force of the front (`front = true`) or rear tire at its static
 * load, sampled at `n` slip values evenly spread over `[lo, hi]`.
 * `channel` is `"longitudinal"`, `"side_slip"` or `"camber"`.
 */
export function tire_curve(channel: string, front: boolean, lo: number, hi: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_designsummary_free: (a: number, b: number) => void;
    readonly __wbg_runtraces_free: (a: number, b: number) => void;
    readonly design: (a: number, b: number, c: number) => [number, number, number];
    readonly designsummary_drive_torque: (a: number) => number;
    readonly designsummary_excluded: (a: number) => [number, number];
    readonly designsummary_im: (a: number) => [number, number];
    readonly designsummary_re: (a: number) => [number, number];
    readonly designsummary_riccati_residual: (a: number) => number;
    readonly designsummary_trim: (a: number) => [number, number];
    readonly run: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly runtraces_estimate: (a: number, b: number, c: number) => [number, number, number, number];
    readonly runtraces_plant: (a: number, b: number, c: number) => [number, number, number, number];
    readonly runtraces_t: (a: number) => [number, number];
    readonly tire_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
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
