#include "tg/session.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _WIN32
#include <io.h>
#define TG_ISATTY _isatty
#define TG_FILENO _fileno
#else
#include <unistd.h>
#define TG_ISATTY isatty
#define TG_FILENO fileno
#endif

namespace tg {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

std::string reach_line(const TypeGraph& graph) {
    auto [node, reach] = graph.greatest_reach();
    char buf[128];
    if (node == kNoNode) return "typegraph:                 greatest reach => none\n";
    std::snprintf(buf, sizeof(buf), "typegraph: %30s => %s (%llu nodes)\n", "greatest reach",
                  to_hex(graph.nodes()[node].base).c_str(),
                  static_cast<unsigned long long>(reach));
    return buf;
}

}  // namespace

Session::Session(const TypeCatalog& catalog, const DumpImage& image, CacheTypeTable table,
                 std::ostream& out, SessionConfig config)
    : catalog_(catalog), image_(image), table_(std::move(table)), out_(out),
      config_(std::move(config)) {
    if (config_.lock_types.empty()) {
        lock_model_ = LockModel::all_sync(catalog_);
    } else {
        for (const std::string& name : config_.lock_types) {
            auto tid = catalog_.find(name);
            if (!tid) throw Error("lock model: unknown type '" + name + "'");
            TypeId resolved = catalog_.resolve(*tid);
            if (!catalog_.type(resolved).sync_primitive)
                throw Error("lock model: " + name + " is not flagged sync_primitive");
            lock_model_.lock_types.push_back(resolved);
        }
    }
}

int Session::repl(std::istream& in) {
    std::string line;
    while (true) {
        out_ << "> " << std::flush;
        if (!std::getline(in, line)) {
            out_ << "\n";
            return 0;
        }
        if (!execute(line)) return 0;
    }
}

void Session::error(const std::string& message) {
    if (config_.color) out_ << "\033[31m" << message << "\033[0m\n";
    else out_ << message << "\n";
}

void Session::usage() {
    out_ << "commands:\n"
            "  ::typegraph             build the type graph and run all passes\n"
            "  ::whattype <addr>       report the type of the object containing addr\n"
            "  ::istype <addr> <type>  set a node's type manually and reprocess\n"
            "  ::findlocks             list held locks\n"
            "  ::findfalse             list potential false sharing\n"
            "  ::conflicts             list type conflicts\n"
            "  ::stats                 reprint pass statistics\n"
            "  ::reach                 report the node of greatest reach\n"
            "  ::eval <truthfile>      score inferences against a truth sidecar\n"
            "  ::quit                  exit\n";
}

bool Session::require_graph() {
    if (graph_ && graph_->ran()) return true;
    error("run ::typegraph first");
    return false;
}

bool Session::execute(const std::string& line) {
    std::vector<std::string> tokens = tokenize(line);
    if (tokens.empty()) return true;
    const std::string& cmd = tokens[0];
    try {
        if (cmd == "::quit") return false;
        if (cmd == "::typegraph") cmd_typegraph();
        else if (cmd == "::whattype") cmd_whattype(tokens);
        else if (cmd == "::istype") cmd_istype(tokens);
        else if (cmd == "::stats") {
            if (require_graph()) out_ << render_stats(graph_->stats());
        } else if (cmd == "::reach") cmd_reach();
        else if (cmd == "::findlocks") {
            if (require_graph()) out_ << render_findlocks(*graph_, findlocks(*graph_, lock_model_));
        } else if (cmd == "::findfalse") {
            if (require_graph())
                out_ << render_findfalse(*graph_, findfalse(*graph_, config_.coherence));
        } else if (cmd == "::conflicts") {
            if (require_graph()) out_ << render_conflicts(*graph_, conflicts(*graph_));
        } else if (cmd == "::eval") cmd_eval(tokens);
        else usage();
    } catch (const Error& e) {
        error(e.what());
    }
    return true;
}

void Session::cmd_typegraph() {
    graph_.emplace(image_, catalog_, table_);
    out_ << render_stats(graph_->run());
    out_ << reach_line(*graph_);
}

void Session::cmd_whattype(const std::vector<std::string>& args) {
    if (args.size() != 2) {
        error("usage: ::whattype <addr>");
        return;
    }
    if (!require_graph()) return;
    auto addr = parse_hex(args[1]);
    if (!addr) {
        error("bad address '" + args[1] + "'");
        return;
    }
    out_ << graph_->render_report(graph_->whattype(*addr));
}

void Session::cmd_istype(const std::vector<std::string>& args) {
    if (args.size() < 3) {
        error("usage: ::istype <addr> <type>");
        return;
    }
    if (!require_graph()) return;
    auto addr = parse_hex(args[1]);
    if (!addr) {
        error("bad address '" + args[1] + "'");
        return;
    }
    std::string spelling = args[2];
    for (size_t i = 3; i < args.size(); i++) spelling += " " + args[i];
    auto tid = catalog_.find(spelling);
    if (!tid) {
        error("unknown type '" + spelling + "'");
        return;
    }
    out_ << render_stats(graph_->istype(*addr, *tid));
}

void Session::cmd_reach() {
    if (!require_graph()) return;
    out_ << reach_line(*graph_);
}

void Session::cmd_eval(const std::vector<std::string>& args) {
    if (args.size() != 2) {
        error("usage: ::eval <truthfile>");
        return;
    }
    if (!require_graph()) return;
    GroundTruth truth = GroundTruth::load_file(args[1]);
    out_ << render_eval(evaluate(*graph_, truth));
}

// --- batch front ends ---------------------------------------------------------

namespace {

bool color_enabled() {
    const char* env = std::getenv("TG_COLOR");
    std::string mode = env ? env : "auto";
    if (mode == "always") return true;
    if (mode == "never") return false;
    return TG_ISATTY(TG_FILENO(stdout)) != 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"postmortem type identification"};
    std::string dump_path, catalog_path, table_path, eval_path, script_path;
    std::string lock_types;
    uint64_t coherence = 64;
    app.add_option("dump", dump_path, "dump document")->required();
    app.add_option("--catalog", catalog_path, "type catalog document")->required();
    app.add_option("--cache-table", table_path, "cache/type table document");
    app.add_option("--coherence", coherence, "coherence granularity in bytes");
    app.add_option("--lock-types", lock_types, "comma-separated lock type names");
    app.add_option("--eval", eval_path, "score against a truth sidecar and exit");
    app.add_option("--script", script_path, "replay commands from a file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "tg: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        TypeCatalog catalog = TypeCatalog::load_file(catalog_path);
        DumpImage image = DumpImage::load_file(dump_path, catalog);
        CacheTypeTable table;
        if (!table_path.empty()) table = CacheTypeTable::load_file(table_path);

        SessionConfig config;
        config.coherence = coherence;
        config.color = color_enabled();
        if (!lock_types.empty()) {
            std::istringstream ss(lock_types);
            std::string name;
            while (std::getline(ss, name, ',')) config.lock_types.push_back(name);
        }
        Session session(catalog, image, table, std::cout, config);

        if (!eval_path.empty()) {
            GroundTruth truth = GroundTruth::load_file(eval_path);
            session.execute("::typegraph");
            EvalReport report = evaluate(*session.graph(), truth);
            std::cout << render_eval(report);
            return report.misidentification_rate > 0.0 ? 1 : 0;
        }
        if (!script_path.empty()) {
            std::ifstream script(script_path);
            if (!script) throw Error("cannot open script: " + script_path);
            return session.repl(script);
        }
        return session.repl(std::cin);
    } catch (const Error& e) {
        std::cerr << "tg: " << e.what() << "\n";
        return 1;
    }
}

int run_synth_cli(int argc, char** argv) {
    CLI::App app{"synthetic dump generator"};
    std::string spec_path, catalog_path, out_path;
    app.add_option("spec", spec_path, "scenario document")->required();
    app.add_option("--catalog", catalog_path, "type catalog document")->required();
    app.add_option("-o,--output", out_path, "output dump path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "tg-synth: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        TypeCatalog catalog = TypeCatalog::load_file(catalog_path);
        SynthSpec spec = SynthSpec::load_file(spec_path);
        Generated gen = generate(spec, catalog);
        write_text_file(out_path, gen.dump_text);
        write_text_file(out_path + ".truth", gen.truth.to_json());
        nlohmann::json table;
        table["entries"] = nlohmann::json::array();
        for (const auto& [cache, type] : gen.cache_table.entries) {
            nlohmann::json e;
            e["cache"] = cache;
            e["type"] = type;
            table["entries"].push_back(std::move(e));
        }
        write_text_file(out_path + ".cachetable", table.dump(2) + "\n");
        std::cerr << "tg-synth: wrote " << out_path << " (+.truth, +.cachetable)\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "tg-synth: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace tg
