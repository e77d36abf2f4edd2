/** Version of the bindings; kept in lockstep with the core library. */
export const VERSION = "0.1.0";
