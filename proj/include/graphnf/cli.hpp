#pragma once

namespace graphnf::cli {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kDivergence = 3 };

int run(int argc, char** argv);

}  // namespace graphnf::cli
