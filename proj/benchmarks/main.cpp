#include <benchmark/benchmark.h>

// The distro's libbenchmark_main.a is LTO bytecode from another compiler
// release, so main lives here and only the shared library is linked.
BENCHMARK_MAIN();
