/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const check_action: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number, number];
export const evaluate_expression: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const run_scenario: (a: number, b: number, c: bigint, d: bigint) => [number, number, number, number];
export const taxi_norms: () => [number, number];
export const taxi_scenario: () => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
