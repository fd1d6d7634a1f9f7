// ebsp: command-line front end.
//
// Exit codes: 0 success, 1 property violation, 2 usage or parse error,
// 3 budget exceeded.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ebsp/ebsp.hpp"

namespace fs = std::filesystem;
using namespace ebsp;

namespace {

enum Exit { kOk = 0, kViolation = 1, kUsage = 2, kBudget = 3 };

struct Args {
    std::string alphabet, tree, automaton, structure, a, b, formula, filter, op, out, config;
    std::string logic = "fo", vocabulary = "E/2", protect, direction = "auto";
    int rank = 2, k = 0, labels = 0;
    std::size_t max_size = 4, lo = 1, hi = 1, trials = 200, count = 10, max_leaves = 10;
    bool simple_graphs = false, full = false, verbose = false;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
};

/// key=value report with a schema header.
class Report {
public:
    explicit Report(const std::string& command) { add("schema", "1"), add("command", command); }

    template <class T>
    Report& add(const std::string& key, const T& value) {
        std::ostringstream os;
        os << value;
        text_ += key + "=" + os.str() + "\n";
        return *this;
    }
    Report& flag(const std::string& key, bool v) { return add(key, v ? "true" : "false"); }
    const std::string& text() const { return text_; }

private:
    std::string text_;
};

class Run {
public:
    Run(const Args& args, RunConfig cfg) : args_(args), cfg_(std::move(cfg)) {
        if (!args.out.empty()) {
            fs::create_directories(args.out);
            write("config.txt", cfg_.to_text());
        }
    }

    const RunConfig& config() const { return cfg_; }

    void write(const std::string& name, const std::string& content) const {
        if (args_.out.empty()) return;
        std::ofstream os(fs::path(args_.out) / name, std::ios::binary | std::ios::trunc);
        if (!os) throw DomainError("cannot write '" + (fs::path(args_.out) / name).string() + "'");
        os << content;
    }

    void finish(const Report& r) const {
        std::cout << r.text();
        write("report.txt", r.text());
    }

private:
    const Args& args_;
    RunConfig cfg_;
};

std::string need(const std::string& v, const char* flag) {
    if (v.empty()) throw CLI::RequiredError(flag);
    return v;
}

Alphabet load_alpha(const Args& a) { return load_alphabet(need(a.alphabet, "--alphabet")); }

OpTree load_tree(const Args& a, const Alphabet& alpha) {
    return parse_tree(detail::read_file(need(a.tree, "--tree")), alpha);
}

TreeAutomaton load_aut(const Args& a, const Alphabet& alpha) {
    if (a.automaton.empty()) return default_automaton(alpha);
    return parse_automaton(detail::read_file(a.automaton), alpha);
}

Structure load_structure(const std::string& file, const char* flag) {
    return parse_structure(detail::read_file(need(file, flag)));
}

LogicMode mode_of(const Args& a) { return parse_logic_mode(a.logic); }

VocabularyPtr parse_vocabulary(const std::string& spec, int labels) {
    std::vector<RelationSymbol> rels;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        auto slash = item.find('/');
        if (slash == std::string::npos) throw ParseError("vocabulary entry '" + item + "' needs NAME/ARITY");
        rels.push_back({item.substr(0, slash), static_cast<int>(detail::parse_int(item.substr(slash + 1), 0, "arity"))});
    }
    return make_vocabulary(std::move(rels), labels);
}

FormulaPtr load_formula(const std::string& file, const Vocabulary& voc, LogicMode mode) {
    auto phi = parse_formula(detail::read_file(need(file, "--formula")), voc, mode);
    if (!is_sentence(*phi)) throw DomainError("formula in '" + file + "' is not a sentence");
    return phi;
}

/// Composer with the on-disk table of the cache directory, when one is set.
class CachedComposer {
public:
    CachedComposer(const Alphabet& alpha, int m, LogicMode mode, const RunConfig& cfg)
        : comp(alpha, m, mode, cfg.limits) {
        auto dir = cfg.cache_dir.empty() ? cache_directory() : cfg.cache_dir;
        if (dir.empty()) return;
        fs::create_directories(dir);
        file_ = dir / comp.file_name();
        if (fs::exists(file_)) comp.load(file_);
    }
    ~CachedComposer() {
        if (file_.empty()) return;
        try {
            comp.save(file_);
        } catch (const std::exception& e) {
            std::cerr << "warning: could not save composition table: " << e.what() << "\n";
        }
    }
    Composer comp;

private:
    fs::path file_;
};

ElementSet parse_protect(const std::string& spec, const Structure& a) {
    std::vector<ElementId> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if (item[0] == 'e') item = item.substr(1);
        auto i = detail::parse_int(item, 0, "element");
        if (i < 1 || static_cast<std::size_t>(i) > a.size())
            throw DomainError("--protect: element " + item + " outside 1.." + std::to_string(a.size()));
        out.push_back(a.id(static_cast<std::size_t>(i - 1)));
    }
    return ElementSet(std::move(out));
}

PreservationOptions preservation_options(const Args& a, const RunConfig& cfg, const Vocabulary& voc) {
    PreservationOptions o;
    o.max_universe = cfg.enumeration_budget;
    o.enumeration.simple_graphs = a.simple_graphs;
    if (!a.filter.empty()) {
        auto cls = load_formula(a.filter, voc, LogicMode::MSO);
        o.filter = [cls](const Structure& s) { return eval_formula(*cls, s); };
    }
    return o;
}

// --- subcommands -------------------------------------------------------------

int cmd_eval(const Args& a, const Run& run) {
    auto alpha = load_alpha(a);
    auto t = load_tree(a, alpha);
    auto s = evaluate(t, alpha).structure;
    auto text = to_text(s, true);
    run.write("structure.str", text);
    std::cout << text;
    return kOk;
}

int cmd_type(const Args& a, const Run& run) {
    auto s = load_structure(a.structure, "--structure");
    auto fp = type_of(s, a.rank, mode_of(a), run.config().limits);
    Report r("type");
    r.add("logic", a.logic).add("rank", a.rank).add("elements", s.size()).add("digest", fp.hex()).add("type_text_bytes", fp.text.size());
    run.write("type.txt", fp.text);
    run.finish(r);
    if (a.verbose) std::cout << fp.text << "\n";
    return kOk;
}

int cmd_equiv(const Args& a, const Run& run) {
    auto x = load_structure(a.a, "--a"), y = load_structure(a.b, "--b");
    const auto& lim = run.config().limits;
    bool eq = type_of(x, a.rank, mode_of(a), lim) == type_of(y, a.rank, mode_of(a), lim);
    std::cout << (eq ? "true" : "false") << "\n";
    Report r("equiv");
    r.add("logic", a.logic).add("rank", a.rank).flag("equivalent", eq);
    run.write("report.txt", r.text());
    return kOk;
}

int cmd_annotate(const Args& a, const Run& run) {
    auto alpha = load_alpha(a);
    auto t = load_tree(a, alpha);
    auto aut = load_aut(a, alpha);
    CachedComposer cc(alpha, a.rank, mode_of(a), run.config());
    auto ann = annotate(t, cc.comp, aut);
    std::string nodes;
    for (std::size_t v = 0; v < t.size(); ++v)
        nodes += to_string(t.address_of(v)) + " delta1=" + cc.comp.fingerprint(ann.delta1[v]).hex() +
                 " delta2=" + aut.state_name(ann.delta2[v]) + "\n";
    run.write("annotation.txt", nodes);
    Report r("annotate");
    r.add("logic", a.logic).add("rank", a.rank).add("nodes", t.size()).add("root_delta1", cc.comp.fingerprint(ann.root()).hex());
    r.add("root_delta2", aut.state_name(ann.delta2[0])).flag("accepted", aut.accepting(ann.delta2[0]));
    r.add("types", cc.comp.type_count()).add("table_entries", cc.comp.table_size());
    std::cout << nodes;
    run.finish(r);
    return kOk;
}

int cmd_kernel(const Args& a, const Run& run) {
    auto alpha = load_alpha(a);
    auto t = load_tree(a, alpha);
    auto aut = load_aut(a, alpha);
    auto A = evaluate(t, alpha).structure;
    auto w = parse_protect(a.protect, A);
    KernelOptions opt;
    opt.limits = run.config().limits;
    std::optional<CachedComposer> cc;
    if (w.empty()) {
        cc.emplace(alpha, a.rank, mode_of(a), run.config());
        opt.composer = &cc->comp;
    }
    auto k = kernelize(t, alpha, a.rank, mode_of(a), aut, w, opt);
    const auto& c = k.certificate;
    const auto& rep = k.report;
    Report r("kernel");
    r.add("logic", a.logic).add("rank", a.rank).add("protected", w.size());
    r.add("input_nodes", rep.input_nodes).add("output_nodes", rep.output_nodes);
    r.add("input_height", rep.input_height).add("output_height", rep.output_height);
    r.add("input_degree", rep.input_degree).add("output_degree", rep.output_degree);
    r.add("height_steps", rep.height_steps).add("degree_steps", rep.degree_steps);
    r.add("eta1", rep.eta1).add("eta2", rep.eta2);
    r.add("size_a", c.size_a).add("size_b", c.size_b).add("witness_bound", c.witness_bound);
    r.flag("accepted", c.accepted).flag("substructure", c.substructure).flag("contains_w", c.contains_w);
    r.flag("within_bound", c.within_bound).flag("delta1_preserved", c.delta1_preserved);
    r.flag("oracle_checked", c.oracle_checked).flag("oracle_equal", c.oracle_equal).flag("certificate_ok", c.ok());
    run.write("kernel.sexp", to_sexp(k.tree, *k.alphabet) + "\n");
    run.write("kernel.str", to_text(k.kernel, true));
    std::cout << "tree=" << to_sexp(k.tree, *k.alphabet) << "\n";
    run.finish(r);
    return c.ok() ? kOk : kViolation;
}

int cmd_scale(const Args& a, const Run& run) {
    auto alpha = load_alpha(a);
    auto t = load_tree(a, alpha);
    auto aut = load_aut(a, alpha);
    CachedComposer cc(alpha, a.rank, mode_of(a), run.config());
    ScaleRequest req{a.rank, mode_of(a), a.lo, a.hi, ScaleDirection::Auto};
    if (a.direction == "up")
        req.direction = ScaleDirection::Up;
    else if (a.direction == "down")
        req.direction = ScaleDirection::Down;
    else if (a.direction != "auto")
        throw DomainError("--direction must be up, down or auto");
    KernelOptions opt;
    opt.limits = run.config().limits;
    Report r("scale");
    r.add("logic", a.logic).add("rank", a.rank).add("lo", a.lo).add("hi", a.hi);
    try {
        auto res = scale_generate(t, cc.comp, aut, req, opt);
        const auto& rep = res.report;
        const char* dir = rep.direction == ScaleDirection::Up ? "up" : rep.direction == ScaleDirection::Down ? "down" : "none";
        r.add("direction", dir).add("input_size", rep.input_size).add("output_size", rep.output_size);
        r.add("input_nodes", rep.input_nodes).add("output_nodes", rep.output_nodes);
        r.add("steps", rep.steps).add("granularity", rep.granularity);
        r.flag("accepted", rep.accepted).flag("delta1_preserved", rep.delta1_preserved).flag("embedding", rep.embedding);
        r.flag("oracle_checked", rep.oracle_checked).flag("oracle_equal", rep.oracle_equal).flag("ok", rep.ok());
        run.write("scaled.sexp", to_sexp(res.tree, alpha) + "\n");
        run.write("scaled.str", to_text(evaluate(res.tree, alpha).structure, true));
        std::cout << "tree=" << to_sexp(res.tree, alpha) << "\n";
        run.finish(r);
        return rep.ok() ? kOk : kViolation;
    } catch (const InfeasibleError& e) {
        std::string sizes;
        for (auto x : e.achievable()) sizes += (sizes.empty() ? "" : ",") + std::to_string(x);
        r.add("infeasible", e.what()).add("achievable", sizes);
        run.finish(r);
        return kViolation;
    }
}

int cmd_preservation(const Args& a, const Run& run, bool psc) {
    auto voc = parse_vocabulary(a.vocabulary, a.labels);
    auto phi = load_formula(a.formula, *voc, LogicMode::MSO);
    auto opt = preservation_options(a, run.config(), *voc);
    auto rep = psc ? psc_check(*phi, voc, a.k, a.max_size, opt) : pce_check(*phi, voc, a.k, a.max_size, opt);
    Report r(psc ? "psc-check" : "pce-check");
    r.add("formula", to_string(*phi)).add("k", a.k).add("max_size", a.max_size);
    r.add("verdict", rep.verdict_text()).add("structures", rep.structures).add("relevant", rep.relevant);
    if (rep.counterexample) {
        run.write("counterexample.str", to_text(*rep.counterexample));
        for (std::size_t i = 0; i < rep.cover.size(); ++i) run.write("cover" + std::to_string(i + 1) + ".str", to_text(rep.cover[i], true));
        r.add("counterexample_size", rep.counterexample->size()).add("cover_members", rep.cover.size());
    }
    run.finish(r);
    if (rep.counterexample && a.out.empty()) std::cout << to_text(*rep.counterexample);
    return rep.holds() ? kOk : kViolation;
}

int cmd_crux(const Args& a, const Run& run) {
    auto s = load_structure(a.structure, "--structure");
    auto phi = load_formula(a.formula, s.vocabulary(), LogicMode::MSO);
    PreservationOptions opt;
    opt.max_universe = run.config().enumeration_budget;
    auto c = find_crux(*phi, s, a.k, opt);
    Report r("crux");
    r.add("k", a.k).add("elements", s.size()).flag("found", c.has_value());
    if (c) {
        std::string members;
        for (auto e : c->crux) members += (members.empty() ? "" : ",") + std::to_string(*s.index_of(e) + 1);
        r.add("crux", members).add("substructures_checked", c->checked);
    }
    run.finish(r);
    return c ? kOk : kViolation;
}

int cmd_modelcheck(const Args& a, const Run& run) {
    Report r("modelcheck");
    if (!a.structure.empty()) {
        auto s = load_structure(a.structure, "--structure");
        auto phi = load_formula(a.formula, s.vocabulary(), mode_of(a));
        bool v = eval_formula(*phi, s);
        r.add("formula", to_string(*phi)).add("elements", s.size()).flag("value", v);
        run.finish(r);
        return kOk;
    }
    auto alpha = load_alpha(a);
    auto t = load_tree(a, alpha);
    auto aut = load_aut(a, alpha);
    auto phi = load_formula(a.formula, *alpha.vocabulary(), mode_of(a));
    const int m = std::max(quantifier_rank(*phi), 1);
    KernelOptions opt;
    opt.limits = run.config().limits;
    opt.oracle = false;
    CachedComposer cc(alpha, m, mode_of(a), run.config());
    opt.composer = &cc.comp;
    auto k = kernelize(t, alpha, m, mode_of(a), aut, {}, opt);
    bool onKernel = eval_formula(*phi, k.kernel);
    r.add("formula", to_string(*phi)).add("rank", m).add("size_a", k.certificate.size_a).add("size_b", k.certificate.size_b);
    r.flag("value", onKernel);
    int code = kOk;
    if (a.full) {
        bool onFull = eval_formula(*phi, evaluate(t, alpha).structure);
        r.flag("value_full", onFull).flag("agree", onFull == onKernel);
        if (onFull != onKernel) code = kViolation;
    }
    run.finish(r);
    return code;
}

int cmd_verify_fvc(const Args& a, const Run& run) {
    auto alpha = load_alpha(a);
    FvcTrialOptions opt;
    opt.trials = a.trials;
    opt.seed = run.config().seed;
    auto rep = verify_fvc(alpha, need(a.op, "--op"), a.rank, mode_of(a), opt, run.config().limits);
    Report r("verify-fvc");
    r.add("op", rep.op).add("logic", a.logic).add("rank", rep.rank).add("trials", rep.trials).add("passed", rep.passed);
    r.add("classes", rep.classes).flag("ok", rep.ok());
    for (std::size_t i = 0; i < rep.counterexample.size(); ++i) r.add("counterexample" + std::to_string(i + 1), rep.counterexample[i]);
    run.finish(r);
    return rep.ok() ? kOk : kViolation;
}

int cmd_gen_corpus(const Args& a, const Run& run) {
    auto alpha = load_alpha(a);
    std::mt19937_64 rng(run.config().seed);
    RandomTreeOptions opt;
    opt.max_leaves = a.max_leaves;
    std::string all;
    for (std::size_t i = 0; i < a.count; ++i) {
        auto s = to_sexp(random_tree(alpha, rng, opt), alpha);
        char name[32];
        std::snprintf(name, sizeof name, "tree%04zu.sexp", i);
        run.write(name, s + "\n");
        all += s + "\n";
    }
    if (a.out.empty()) std::cout << all;
    Report r("gen-corpus");
    r.add("count", a.count).add("max_leaves", a.max_leaves).add("seed", run.config().seed);
    run.write("report.txt", r.text());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Type composition over operation trees, bounded equivalent substructures and preservation checks"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    Args args;
    app.add_option("--config", args.config, "key = value config file");
    app.add_option("--seed", args.seed, "random seed");
    app.add_option("--jobs", args.jobs, "parallelism degree");
    app.add_option("--out", args.out, "run directory for artifacts");

    auto common = [&](CLI::App* c, bool tree, bool logic) {
        if (tree) {
            c->add_option("--alphabet", args.alphabet, "alphabet file")->required();
            c->add_option("--tree", args.tree, "tree (s-expression)")->required();
            c->add_option("--automaton", args.automaton, "tree automaton file");
        }
        if (logic) {
            c->add_option("--rank,-m", args.rank, "quantifier rank")->check(CLI::NonNegativeNumber);
            c->add_option("--logic", args.logic, "fo or mso")->check(CLI::IsMember({"fo", "mso", "FO", "MSO"}));
        }
    };
    auto* eval = app.add_subcommand("eval", "evaluate a tree to its structure");
    common(eval, true, false);
    auto* type = app.add_subcommand("type", "rank-m type fingerprint of a structure");
    type->add_option("--structure", args.structure)->required();
    type->add_flag("--verbose,-v", args.verbose, "print the canonical serialization");
    common(type, false, true);
    auto* equiv = app.add_subcommand("equiv", "rank-m equivalence of two structures");
    equiv->add_option("--a", args.a)->required();
    equiv->add_option("--b", args.b)->required();
    common(equiv, false, true);
    auto* annotate = app.add_subcommand("annotate", "per-node type and automaton state");
    common(annotate, true, true);
    auto* kernel = app.add_subcommand("kernel", "equivalent bounded substructure");
    common(kernel, true, true);
    kernel->add_option("--protect", args.protect, "elements (1-based positions in eval output) to keep");
    auto* scale = app.add_subcommand("scale", "move to an equivalent structure of size in [min, max]");
    common(scale, true, true);
    scale->add_option("--min", args.lo)->required();
    scale->add_option("--max", args.hi)->required();
    scale->add_option("--direction", args.direction, "up, down or auto");
    auto prescheck = [&](CLI::App* c) {
        c->add_option("--formula", args.formula)->required();
        c->add_option("--k", args.k)->required()->check(CLI::NonNegativeNumber);
        c->add_option("--max-size", args.max_size)->required();
        c->add_option("--filter", args.filter, "sentence defining the class");
        c->add_option("--vocabulary", args.vocabulary, "NAME/ARITY,...");
        c->add_option("--labels", args.labels, "number of labels");
        c->add_flag("--simple-graphs", args.simple_graphs, "binary relations symmetric and irreflexive");
    };
    auto* psc = app.add_subcommand("psc-check", "bounded check that every model has a k-crux");
    prescheck(psc);
    auto* pce = app.add_subcommand("pce-check", "bounded check of preservation under k-ary covered extensions");
    prescheck(pce);
    auto* crux = app.add_subcommand("crux", "find a k-crux of a model");
    crux->add_option("--formula", args.formula)->required();
    crux->add_option("--structure", args.structure)->required();
    crux->add_option("--k", args.k)->required()->check(CLI::NonNegativeNumber);
    auto* modelcheck = app.add_subcommand("modelcheck", "evaluate a sentence, on the kernel when given a tree");
    modelcheck->add_option("--formula", args.formula)->required();
    modelcheck->add_option("--structure", args.structure);
    modelcheck->add_option("--alphabet", args.alphabet);
    modelcheck->add_option("--tree", args.tree);
    modelcheck->add_option("--automaton", args.automaton);
    modelcheck->add_option("--logic", args.logic)->check(CLI::IsMember({"fo", "mso", "FO", "MSO"}));
    modelcheck->add_flag("--full", args.full, "also evaluate on the full structure");
    auto* fvc = app.add_subcommand("verify-fvc", "randomized composition check of one op");
    fvc->add_option("--alphabet", args.alphabet)->required();
    fvc->add_option("--op", args.op)->required();
    fvc->add_option("--trials", args.trials);
    common(fvc, false, true);
    auto* gen = app.add_subcommand("gen-corpus", "seeded random trees");
    gen->add_option("--alphabet", args.alphabet)->required();
    gen->add_option("--count", args.count);
    gen->add_option("--max-leaves", args.max_leaves);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        RunConfig cfg;
        if (!args.config.empty()) cfg = load_config(args.config);
        if (args.seed) cfg.seed = *args.seed;
        if (args.jobs) cfg.jobs = *args.jobs;
        cfg.validate();
        Run run(args, cfg);
        auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "eval") return cmd_eval(args, run);
        if (name == "type") return cmd_type(args, run);
        if (name == "equiv") return cmd_equiv(args, run);
        if (name == "annotate") return cmd_annotate(args, run);
        if (name == "kernel") return cmd_kernel(args, run);
        if (name == "scale") return cmd_scale(args, run);
        if (name == "psc-check") return cmd_preservation(args, run, true);
        if (name == "pce-check") return cmd_preservation(args, run, false);
        if (name == "crux") return cmd_crux(args, run);
        if (name == "modelcheck") return cmd_modelcheck(args, run);
        if (name == "verify-fvc") return cmd_verify_fvc(args, run);
        if (name == "gen-corpus") return cmd_gen_corpus(args, run);
        return kUsage;
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const BudgetError& e) {
        std::cerr << "budget: " << e.what() << "\n";
        return kBudget;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kUsage;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const UnsupportedShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "violation: " << e.what() << "\n";
        return kViolation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
}
