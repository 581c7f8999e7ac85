#pragma once

#include <iosfwd>

namespace latticeloc {

/// Entry point of the `latticeloc` tool. Returns 0 on success, 1 on domain
/// errors (one `ERROR:<code>:<message>` line on `err`) and 2 on usage errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace latticeloc
