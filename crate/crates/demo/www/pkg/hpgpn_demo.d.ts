/* tslint:disable */
/* eslint-disable */

export class DemoLink {
    free(): void;
    [Symbol.dispose](): void;
    ber_curves(scheme: string, sigma2_psi: number, lo: number, hi: number, step: number): string;
    constructor(n_channels: number, seed: bigint);
    scatter(scheme: string, snr_db: number, sigma2_psi: number, n_symbols: number): string;
    se_curves(sigma2_psi: number, lo: number, hi: number, step: number): string;
    readonly n_channels: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demolink_free: (a: number, b: number) => void;
    readonly demolink_ber_curves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly demolink_n_channels: (a: number) => number;
    readonly demolink_new: (a: number, b: bigint) => [number, number, number];
    readonly demolink_scatter: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly demolink_se_curves: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
