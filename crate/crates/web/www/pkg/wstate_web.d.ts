/* tslint:disable */
/* eslint-disable */

/**
 * `τ22` and `τ33` of the (i, j) two-photon block as `φ_R` runs over one period.
 * Lengths are in micrometers.
 */
export function phase_scan(l_m_um: number, l_b_um: number, phi_b: number, steps: number): string;

/**
 * Post-selected j, k, l color outcomes for the given beamsplitter reflectances.
 */
export function populations(r1: number, r2: number, r3: number, pair_probability: number): string;

/**
 * Simulated tomography run. `shots = 0` gives the analytic reconstruction;
 * `car <= 0` disables the accidental floor.
 */
export function reconstruct(shots: number, seed: number, car: number, jitter_rad: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly phase_scan: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly populations: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly reconstruct: (a: number, b: number, c: number, d: number) => [number, number, number, number];
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
