// Minimal ambient typings for the yargs surface cli.ts actually uses.
// The full @types/yargs package is intentionally not a dependency; if it
// is ever added, delete this file so the declarations do not collide.
declare module 'yargs' {
  export interface Argv {
    scriptName(name: string): Argv
    usage(text: string): Argv
    option(name: string, config: Record<string, unknown>): Argv
    strict(): Argv
    exitProcess(enabled: boolean): Argv
    help(): Argv
    parse(): Promise<Record<string, any>>
  }
  export default function yargs(argv: readonly string[]): Argv
}

declare module 'yargs/helpers' {
  export function hideBin(argv: readonly string[]): string[]
}
