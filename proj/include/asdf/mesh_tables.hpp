#pragma once

namespace asdf::mesh {

extern const signed char kTriTable[256][16];
extern const unsigned char kCornerOffset[8][3];
extern const unsigned char kEdgeCorner[12][2];

}  // namespace asdf::mesh
