#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cdqac/instance.hpp"

namespace cdqac {

// Entry point of the `cdqac` tool. Returns the process exit code: 0 on success, 1 on a
// failed check or runtime error, 2 on a usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Instance files of a directory in lexicographic order; JSON files are skipped.
std::vector<Instance> load_instance_dir(const std::filesystem::path& dir);

}  // namespace cdqac
