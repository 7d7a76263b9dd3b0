// Regenerates the bundled demo fixture from the scripted story in
// tests/support/fig1_fixture.hpp. Usage: fixture_gen [output-dir]
// (default: fixtures/fig1).

#include <filesystem>
#include <iostream>

#include "support/fig1_fixture.hpp"

int main(int argc, char** argv) {
    namespace fs = std::filesystem;
    const fs::path out_dir = argc > 1 ? fs::path(argv[1]) : fs::path("fixtures/fig1");
    try {
        fs::create_directories(out_dir);
        auto store = fixturekit::build_demo_store();
        store->save((out_dir / "replay.json").string());
        geotime::atomic_write_file((out_dir / "dataset.jsonl").string(),
                                   fixturekit::demo_dataset_jsonl());
    } catch (const std::exception& e) {
        std::cerr << "fixture_gen: " << e.what() << "\n";
        return 1;
    }
    std::cout << "wrote " << (out_dir / "replay.json").string() << " and "
              << (out_dir / "dataset.jsonl").string() << "\n";
    return 0;
}
