#include "decaylab/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"Fourier decay lab: runs one experiment described by a config file"};
    std::string config_path, output_dir;
    std::vector<std::string> params;
    bool print_config = false;
    app.add_option("config", config_path, "experiment config file")->required();
    app.add_option("--param", params, "override a config key, as key=value (repeatable)");
    app.add_option("--output-dir", output_dir, "output directory (default: config, then $DECAYLAB_OUTPUT_DIR, then ./decaylab-out)");
    app.add_flag("--print-config", print_config, "print the canonical config and exit");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    std::ifstream f(config_path);
    if (!f) {
        std::cerr << "error: cannot read " << config_path << '\n';
        return 2;
    }
    std::stringstream ss;
    ss << f.rdbuf();
    if (print_config) {
        auto parsed = decaylab::parse_config(ss.str(), params);
        if (!parsed.ok()) {
            for (auto& e : parsed.errors) std::cerr << "config error: " << e << '\n';
            return 2;
        }
        std::cout << decaylab::serialize(*parsed.config);
        return 0;
    }
    return decaylab::run_text(ss.str(), params, output_dir, std::cerr, {}, std::filesystem::path(config_path).parent_path());
}
