#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace ragcal {

class Transport;

/// Parses `args` (without the program name) and runs one subcommand.
/// Returns 0 on success, 1 on a pipeline error, 2 on a configuration error
/// or bad usage.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Same, but every model call goes to `transport` instead of the network.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                std::shared_ptr<Transport> transport);

}  // namespace ragcal
