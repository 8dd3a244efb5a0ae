#pragma once

#include <iosfwd>

namespace colloq {

// Exit codes: 0 success, 1 usage error (help printed), 2 data error.
int run_cli(int argc, const char* const* argv, std::istream& in,
            std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace colloq
