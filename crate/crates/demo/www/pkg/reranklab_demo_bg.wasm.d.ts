/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_page_free: (a: number, b: number) => void;
export const examinationCurve: (a: number, b: number) => [number, number];
export const page_is_empty: (a: number) => number;
export const page_labels: (a: number) => [number, number];
export const page_len: (a: number) => number;
export const page_new: (a: number, b: number) => [number, number, number];
export const page_promote: (a: number, b: number) => void;
export const page_resetToClicks: (a: number, b: number) => void;
export const page_resetToIdeal: (a: number) => void;
export const page_reward: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const page_truths: (a: number) => [number, number];
export const rankMarginals: (a: number, b: number, c: number) => [number, number, number, number];
export const sampleRanking: (a: number, b: number, c: number, d: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
