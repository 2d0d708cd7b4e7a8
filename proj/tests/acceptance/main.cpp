// Acceptance suite: one PASS/FAIL line per criterion, exit 0 iff all pass.
#include <iostream>

#include "acceptance.hpp"

using namespace fbsde::cli;

int main(int argc, char** argv) {
    try {
        ExperimentConfig cfg = argc > 1 ? load_config(argv[1]) : parse_config(R"({"problem": {"builtin": "lq"}})");
        const AcceptanceReport rep = run_acceptance(cfg, std::cerr);
        std::cout << rep.text();
        return rep.passed() ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
