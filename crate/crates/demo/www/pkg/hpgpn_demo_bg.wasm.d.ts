/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demolink_free: (a: number, b: number) => void;
export const demolink_ber_curves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const demolink_n_channels: (a: number) => number;
export const demolink_new: (a: number, b: bigint) => [number, number, number];
export const demolink_scatter: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const demolink_se_curves: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
