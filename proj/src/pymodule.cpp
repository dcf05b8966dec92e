#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "tg/analyzers.hpp"
#include "tg/session.hpp"
#include "tg/synth.hpp"

namespace py = pybind11;

namespace {

// Owns the catalog, image and graph together so Python lifetimes are simple.
class Analysis {
public:
    Analysis(const std::string& catalog_text, const std::string& dump_text,
             const std::string& table_text)
        : catalog_(tg::TypeCatalog::load(catalog_text)),
          image_(tg::DumpImage::load(dump_text, catalog_)),
          table_(table_text.empty() ? tg::CacheTypeTable{}
                                    : tg::CacheTypeTable::load(table_text)) {}

    std::vector<tg::PassStats> run() {
        graph_.emplace(image_, catalog_, table_);
        return graph_->run();
    }

    std::vector<tg::PassStats> stats() const { return graph().stats(); }

    std::string whattype(uint64_t addr) const {
        return graph().render_report(graph().whattype(addr));
    }

    std::vector<tg::PassStats> istype(uint64_t addr, const std::string& type) {
        auto tid = catalog_.find(type);
        if (!tid) throw tg::Error("unknown type '" + type + "'");
        return mutable_graph().istype(addr, *tid);
    }

    std::pair<std::string, uint64_t> greatest_reach() const {
        auto [node, reach] = graph().greatest_reach();
        if (node == tg::kNoNode) return {"", 0};
        return {"0x" + tg::to_hex(graph().nodes()[node].base), reach};
    }

    std::string findlocks_text() const {
        return tg::render_findlocks(graph(),
                                    tg::findlocks(graph(), tg::LockModel::all_sync(catalog_)));
    }

    std::string findfalse_text(uint64_t granularity) const {
        return tg::render_findfalse(graph(), tg::findfalse(graph(), granularity));
    }

    std::string conflicts_text() const {
        return tg::render_conflicts(graph(), tg::conflicts(graph()));
    }

    size_t conflict_count() const { return tg::conflicts(graph()).size(); }

    tg::EvalReport evaluate(const std::string& truth_text) const {
        return tg::evaluate(graph(), tg::GroundTruth::load(truth_text));
    }

private:
    const tg::TypeGraph& graph() const {
        if (!graph_ || !graph_->ran()) throw tg::Error("run() has not completed");
        return *graph_;
    }
    tg::TypeGraph& mutable_graph() {
        if (!graph_ || !graph_->ran()) throw tg::Error("run() has not completed");
        return *graph_;
    }

    tg::TypeCatalog catalog_;
    tg::DumpImage image_;
    tg::CacheTypeTable table_;
    std::optional<tg::TypeGraph> graph_;
};

}  // namespace

PYBIND11_MODULE(tgcore, m) {
    m.doc() = "postmortem type identification over synthetic memory dumps";

    py::register_exception<tg::Error>(m, "TgError");

    py::class_<tg::PassStats>(m, "PassStats")
        .def_readonly("label", &tg::PassStats::label)
        .def_readonly("nodes", &tg::PassStats::nodes)
        .def_readonly("unmarked", &tg::PassStats::unmarked)
        .def_readonly("known", &tg::PassStats::known)
        .def_readonly("conjectured", &tg::PassStats::conjectured)
        .def_readonly("conjectured_fragments", &tg::PassStats::conjectured_fragments)
        .def_readonly("known_or_conjectured", &tg::PassStats::known_or_conjectured)
        .def_readonly("conflicts", &tg::PassStats::conflicts)
        .def_readonly("candidates", &tg::PassStats::candidates)
        .def("__repr__", [](const tg::PassStats& s) {
            return "<PassStats pass=" + s.label + " known_or_conjectured=" +
                   std::to_string(s.known_or_conjectured) + "/" + std::to_string(s.nodes) + ">";
        });

    py::class_<tg::EvalReport>(m, "EvalReport")
        .def_readonly("nodes", &tg::EvalReport::nodes)
        .def_readonly("correct", &tg::EvalReport::correct)
        .def_readonly("misidentified", &tg::EvalReport::misidentified)
        .def_readonly("conflicts", &tg::EvalReport::conflicts)
        .def_readonly("fragments", &tg::EvalReport::fragments)
        .def_readonly("fragments_consistent", &tg::EvalReport::fragments_consistent)
        .def_readonly("unknown", &tg::EvalReport::unknown)
        .def_readonly("recognition_rate", &tg::EvalReport::recognition_rate)
        .def_readonly("misidentification_rate", &tg::EvalReport::misidentification_rate)
        .def("render", &tg::render_eval);

    py::class_<Analysis>(m, "Analysis")
        .def(py::init<const std::string&, const std::string&, const std::string&>(),
             py::arg("catalog"), py::arg("dump"), py::arg("cache_table") = "")
        .def("run", &Analysis::run, "Build the graph and run all passes.")
        .def("stats", &Analysis::stats)
        .def("whattype", &Analysis::whattype, py::arg("addr"))
        .def("istype", &Analysis::istype, py::arg("addr"), py::arg("type"))
        .def("greatest_reach", &Analysis::greatest_reach)
        .def("findlocks", &Analysis::findlocks_text)
        .def("findfalse", &Analysis::findfalse_text, py::arg("granularity") = 64)
        .def("conflicts", &Analysis::conflicts_text)
        .def("conflict_count", &Analysis::conflict_count)
        .def("evaluate", &Analysis::evaluate, py::arg("truth"));

    m.def("render_stats",
          py::overload_cast<const std::vector<tg::PassStats>&>(&tg::render_stats));

    m.def(
        "generate",
        [](const std::string& spec_text, const std::string& catalog_text) {
            tg::TypeCatalog catalog = tg::TypeCatalog::load(catalog_text);
            tg::SynthSpec spec = tg::SynthSpec::load(spec_text);
            tg::Generated gen = tg::generate(spec, catalog);
            std::string table = "{\"entries\": []}";
            if (!gen.cache_table.entries.empty()) {
                table = "{\"entries\": [";
                for (size_t i = 0; i < gen.cache_table.entries.size(); i++) {
                    if (i) table += ", ";
                    table += "{\"cache\": \"" + gen.cache_table.entries[i].first +
                             "\", \"type\": \"" + gen.cache_table.entries[i].second + "\"}";
                }
                table += "]}";
            }
            return py::make_tuple(gen.dump_text, gen.truth.to_json(), table);
        },
        py::arg("spec"), py::arg("catalog"),
        "Generate (dump, truth, cache_table) documents from a scenario spec.");
}
