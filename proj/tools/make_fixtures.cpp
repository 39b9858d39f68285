// Regenerates the shipped case files: make_fixtures <data dir>
#include "rsced/casefile.hpp"
#include "rsced/synthetic.hpp"

#include <filesystem>
#include <iostream>

int main(int argc, char** argv)
{
    using namespace rsced;
    const std::filesystem::path dir = argc > 1 ? argv[1] : "data";
    try {
        std::filesystem::create_directories(dir);
        saveCase(threeBusCase(), (dir / "three_bus.json").string());
        saveCase(syntheticCase(), (dir / "synthetic118.json").string());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
