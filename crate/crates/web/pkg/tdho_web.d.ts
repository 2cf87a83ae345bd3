/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `[re, im, t*]` of `|v|` times the element.
     */
    element(angle: number, offset: number, speed: number): Float64Array;
    /**
     * Parses a run configuration in the same JSON format as the CLI.
     */
    constructor(json: string);
    /**
     * Reconstruction then reference, each `points²` values with x as the slow index.
     */
    preview(angles: number, points: number): Float64Array;
    /**
     * Offsets, real parts, imaginary parts and limits, concatenated.
     */
    row(angle: number, speed: number, samples: number): Float64Array;
    readonly half_width: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_element: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_half_width: (a: number) => number;
    readonly demo_new: (a: number, b: number) => [number, number, number];
    readonly demo_preview: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_row: (a: number, b: number, c: number, d: number) => [number, number, number, number];
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
