#pragma once

// Published detection counts and scores (percent) for six systems.

#include <cstdint>

namespace scopeline::test {

struct TableRow {
  const char* name;
  std::int64_t tp, fp, fn;
  double precision, recall, f1, f2;
};

inline constexpr TableRow kTableRows[] = {
    {"Dilated U-Net (public)", 1746, 752, 927, 69.90, 65.32, 67.53, 66.19},
    {"Dilated U-Net", 1949, 617, 725, 75.95, 72.88, 74.38, 73.47},
    {"AFP-Net (public)", 1718, 418, 956, 80.43, 64.25, 71.43, 66.94},
    {"AFP-Net", 2117, 319, 557, 86.90, 79.17, 82.86, 80.60},
    {"Our system (public)", 1572, 217, 1102, 87.87, 58.79, 70.45, 62.96},
    {"Our system", 1885, 132, 789, 93.46, 70.49, 80.37, 74.14},
};

}  // namespace scopeline::test
