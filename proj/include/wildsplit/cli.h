// Copyright 2026 The Wildsplit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef WILDSPLIT_CLI_H_
#define WILDSPLIT_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace wildsplit {

// Exit codes: 0 success, 1 validation error (one `error: code=<Name> ...`
// line on `err`), 2 usage error. `verify` returns 1 when violations exist.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);
int RunCli(int argc, char** argv);

}  // namespace wildsplit

#endif  // WILDSPLIT_CLI_H_
