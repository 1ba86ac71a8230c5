// cavfb: command line front end for the cavity feedback toolkit.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>

#include "cavfb/io/commands.hpp"

namespace
{
void record_failure(const cavfb::io::RunOptions& opt, const std::string& category, int code, const std::string& what)
{
    std::cerr << "cavfb " << opt.command << ": " << category << ": " << what << "\n";
    std::error_code ec;
    std::filesystem::create_directories(opt.out_dir, ec);
    if (ec) return;
    try {
        cavfb::io::write_file((std::filesystem::path(opt.out_dir) / "error.json").string(),
                              cavfb::io::error_record(opt.command, category, code, what));
    } catch (const std::exception&) {
        // stderr already has the message
    }
}
}  // namespace

int main(int argc, char** argv)
{
    using namespace cavfb::io;
    CLI::App app{"Cavity dissipative-feedback toolkit"};
    app.set_help_all_flag("--help-all");

    RunOptions opt;
    std::string config, grid, channels, reference;
    bool no_metadata = false;
    app.add_option("command", opt.command, "one of: cavity-response, heterodyne, mech-psd, cooling-report, squeezing, "
                                           "thermal-response, fit-response, fit-linewidth-series, fit-mech, "
                                           "thermometry, oracle-check, plot")
        ->required();
    app.add_option("--config", config, "YAML run configuration");
    app.add_option("--out", opt.out_dir, "output directory")->capture_default_str();
    app.add_option("--grid", grid, "frequency grid in Hz: start,stop,points[,log]");
    app.add_flag("--no-metadata", no_metadata, "omit the '#' provenance lines from outputs");
    app.add_option("--jobs", opt.jobs, "worker threads for grid evaluation")->capture_default_str();
    app.add_option("--input", opt.inputs, "input data file (fits, thermometry, oracle-check, plot)");
    auto* plot = app.add_option_group("plot", "plot styling");
    plot->add_flag("--x-log", opt.plot.x_log, "logarithmic frequency axis");
    plot->add_flag("--y-log", opt.plot.y_log, "logarithmic value axis");
    plot->add_flag("--db", opt.plot.y_db, "plot 10 log10 of the values");
    plot->add_option("--reference", reference, "horizontal reference line (e.g. 1 for shot noise)");
    plot->add_option("--channels", channels, "comma separated channels to plot");
    plot->add_option("--title", opt.plot.title, "plot title");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        if (!config.empty()) opt.config_path = config;
        if (!grid.empty()) opt.grid = parse_grid(grid);
        opt.metadata = !no_metadata;
        if (!reference.empty()) opt.plot.reference = parse_double(reference, "--reference");
        if (!channels.empty())
            for (auto c : split_commas(channels)) opt.plot.channels.emplace_back(c);
        const auto result = run(opt);
        for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
        for (const auto& n : result.notes) std::cout << n << "\n";
        for (const auto& f : result.written) std::cout << "wrote " << f << "\n";
        return exit_ok;
    } catch (const UsageError& e) {
        record_failure(opt, "usage", exit_usage, e.what());
        std::cerr << app.help();
        return exit_usage;
    } catch (const cavfb::Error& e) {
        const int code = exit_code(e.category());
        record_failure(opt, std::string(cavfb::to_string(e.category())), code, e.what());
        return code;
    } catch (const std::exception& e) {
        record_failure(opt, "unexpected", exit_unexpected, e.what());
        return exit_unexpected;
    }
}
