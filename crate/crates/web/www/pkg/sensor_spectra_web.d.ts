/* tslint:disable */
/* eslint-disable */

/**
 * Evenly spaced detunings, for labeling the returned curves.
 */
export function axis(start: number, stop: number, points: number): Float64Array;

/**
 * Half-sided bath transform F(λ): real parts followed by imaginary parts.
 */
export function bath_kernel(alpha: number, temperature: number, start: number, stop: number, points: number): Float64Array;

/**
 * g²(ω₁, ω₂) with ω₁ fixed and ω₂ swept, joint phonon treatment.
 */
export function g2_cut(rabi: number, alpha: number, linewidth: number, omega1: number, start: number, stop: number, points: number): Float64Array;

/**
 * Single-photon spectrum S(ω) of the driven emitter seen by one sensor.
 *
 * `mode` is "joint", "additive" or "off".
 */
export function spectrum(rabi: number, alpha: number, mode: string, linewidth: number, start: number, stop: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly axis: (a: number, b: number, c: number) => [number, number];
    readonly bath_kernel: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly g2_cut: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly spectrum: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
