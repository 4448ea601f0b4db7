#pragma once
namespace delsyn { inline int cli_main(int, char**) { return 0; } }
