#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tg/analyzers.hpp"
#include "tg/synth.hpp"
#include "tg/typegraph.hpp"

namespace tg {

struct SessionConfig {
    uint64_t coherence = 64;  // bytes per coherence line
    std::vector<std::string> lock_types;  // empty = every sync-flagged type
    bool color = false;
};

// Interactive / scripted command front end. Scripted replay of a transcript
// produces byte-identical output to the interactive session: both paths go
// through repl().
class Session {
public:
    Session(const TypeCatalog& catalog, const DumpImage& image, CacheTypeTable table,
            std::ostream& out, SessionConfig config = {});

    // Reads "> "-prompted lines until ::quit or end of input. Returns the
    // process exit status.
    int repl(std::istream& in);

    // Dispatches one command line; returns false when the session ends.
    bool execute(const std::string& line);

    const TypeGraph* graph() const { return graph_ ? &*graph_ : nullptr; }

private:
    bool require_graph();
    void error(const std::string& message);
    void usage();
    void cmd_typegraph();
    void cmd_whattype(const std::vector<std::string>& args);
    void cmd_istype(const std::vector<std::string>& args);
    void cmd_reach();
    void cmd_eval(const std::vector<std::string>& args);

    const TypeCatalog& catalog_;
    const DumpImage& image_;
    CacheTypeTable table_;
    std::ostream& out_;
    SessionConfig config_;
    LockModel lock_model_;
    std::optional<TypeGraph> graph_;
};

// `tg <dump> --catalog <file> [--cache-table <file>] [--coherence N]
//     [--lock-types a,b] [--eval <truth>] [--script <cmdfile>]`
int run_cli(int argc, char** argv);

// `tg-synth <spec> --catalog <file> -o <dump>`: writes the dump, its
// `<dump>.truth` sidecar, and `<dump>.cachetable`.
int run_synth_cli(int argc, char** argv);

}  // namespace tg
