#pragma once

// Classic marching-cubes case tables (Lorensen-Cline numbering).

namespace dualms::detail {

extern const int kMcEdgeTable[256];
extern const int kMcTriTable[256][16];

}  // namespace dualms::detail
