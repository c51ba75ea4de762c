#include "reponav/persistence.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <fstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "reponav/error.hpp"

namespace reponav {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "section files are little-endian");

namespace {

constexpr std::string_view kMagic = "RNAV";
constexpr const char* kSections[][2] = {
    {"units", "units.json"}, {"graph", "graph.bin"}, {"sparse", "sparse.bin"}, {"dense", "dense.bin"}};

class Writer {
public:
    explicit Writer(std::string_view tag) {
        out_ += kMagic;
        str(tag);
        u32(kIndexFormatVersion);
    }

    template <class T>
    void raw(T v) {
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        out_.append(buf, sizeof(T));
    }
    void u32(std::uint32_t v) { raw(v); }
    void u64(std::uint64_t v) { raw(v); }
    void i32(std::int32_t v) { raw(v); }
    void f64(double v) { raw(v); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.append(s);
    }

    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    Reader(std::string_view data, std::string_view tag, std::string name) : data_(data), name_(std::move(name)) {
        if (data_.substr(0, kMagic.size()) != kMagic) fail("bad magic");
        pos_ = kMagic.size();
        if (str() != tag) fail("wrong section tag");
        if (u32() != static_cast<std::uint32_t>(kIndexFormatVersion)) fail("unsupported format version");
    }

    template <class T>
    T raw() {
        if (pos_ + sizeof(T) > data_.size()) fail("truncated");
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::uint32_t u32() { return raw<std::uint32_t>(); }
    std::uint64_t u64() { return raw<std::uint64_t>(); }
    std::int32_t i32() { return raw<std::int32_t>(); }
    double f64() { return raw<double>(); }
    std::string str() {
        auto n = u32();
        if (pos_ + n > data_.size()) fail("truncated");
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    void done() const {
        if (pos_ != data_.size()) fail("trailing bytes");
    }

    [[noreturn]] void fail(const std::string& why) const { throw Error(ErrorCode::CorruptIndex, name_ + ": " + why); }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
    std::string name_;
};

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::CorruptIndex, "missing section " + p.filename().string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_all(const fs::path& p, std::string_view bytes) {
    auto tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + tmp.string());
    }
    fs::rename(tmp, p);
}

Sha256 from_hex(const std::string& hex) {
    Sha256 out{};
    if (hex.size() != 64) throw Error(ErrorCode::CorruptIndex, "bad digest " + hex);
    for (std::size_t i = 0; i < 32; ++i) out[i] = static_cast<std::uint8_t>(std::stoul(hex.substr(2 * i, 2), nullptr, 16));
    return out;
}

const char* language_name(FileLanguage l) {
    switch (l) {
        case FileLanguage::Source: return "source";
        case FileLanguage::Documentation: return "documentation";
        case FileLanguage::Other: return "other";
    }
    return "other";
}

FileLanguage parse_language(const std::string& s) {
    if (s == "source") return FileLanguage::Source;
    if (s == "documentation") return FileLanguage::Documentation;
    return FileLanguage::Other;
}

nlohmann::ordered_json span_json(const LineSpan& s) { return nlohmann::ordered_json::array({s.start, s.end}); }
LineSpan parse_span(const nlohmann::json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

void write_sparse(Writer& w, const SparseIndex& s) {
    w.u32(static_cast<std::uint32_t>(s.granularity.size()));
    for (auto k : s.granularity) w.str(to_string(k));
    w.u64(s.doc_count);
    w.f64(s.avg_doc_length);
    w.u32(static_cast<std::uint32_t>(s.doc_lengths.size()));
    for (const auto& [unit, len] : s.doc_lengths) {
        w.str(unit.value);
        w.i32(len);
    }
    w.u32(static_cast<std::uint32_t>(s.postings.size()));
    for (const auto& [term, list] : s.postings) {
        w.str(term);
        w.u32(static_cast<std::uint32_t>(list.size()));
        for (const auto& p : list) {
            w.str(p.unit.value);
            w.i32(p.tf);
        }
    }
}

SparseIndex read_sparse(Reader& r) {
    SparseIndex s;
    for (auto n = r.u32(); n > 0; --n) {
        auto kind = parse_unit_kind(r.str());
        if (!kind) r.fail("unknown unit kind");
        s.granularity.insert(*kind);
    }
    s.doc_count = r.u64();
    s.avg_doc_length = r.f64();
    for (auto n = r.u32(); n > 0; --n) {
        UnitId id(r.str());
        s.doc_lengths.emplace(std::move(id), r.i32());
    }
    for (auto n = r.u32(); n > 0; --n) {
        auto term = r.str();
        auto& list = s.postings[term];
        auto m = r.u32();
        list.reserve(m);
        for (; m > 0; --m) {
            UnitId id(r.str());
            list.push_back({std::move(id), r.i32()});
        }
    }
    return s;
}

std::string utc_now() {
    auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", now);
}

RepoModel parse_units(const std::string& bytes, const std::string& name) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
        RepoSnapshot snap;
        const auto& s = j.at("snapshot");
        snap.root_path = s.at("root").get<std::string>();
        snap.corpus_grammar_id = s.at("grammar").get<std::string>();
        snap.snapshot_hash = from_hex(s.at("hash").get<std::string>());
        snap.include_globs = s.at("include").get<std::vector<std::string>>();
        snap.exclude_globs = s.at("exclude").get<std::vector<std::string>>();
        for (const auto& f : s.at("files")) {
            SourceFile sf;
            sf.path = f.at("path");
            sf.line_count = f.at("lines");
            sf.content_digest = from_hex(f.at("sha256"));
            sf.module_path = f.at("module");
            sf.size_bytes = f.at("bytes");
            sf.language = parse_language(f.at("language"));
            snap.files.push_back(std::move(sf));
        }
        for (const auto& d : s.at("diagnostics")) snap.diagnostics.push_back({d.at(0), d.at(1)});
        std::vector<CodeUnit> units;
        for (const auto& u : j.at("units")) {
            CodeUnit cu;
            cu.id = UnitId(u.at("id").get<std::string>());
            auto kind = parse_unit_kind(u.at("kind").get<std::string>());
            if (!kind) throw Error(ErrorCode::CorruptIndex, name + ": unknown unit kind");
            cu.kind = *kind;
            cu.path = u.at("path");
            cu.qualified_name = u.at("qualified_name");
            cu.span = parse_span(u.at("span"));
            cu.header_end = u.at("header_end");
            if (!u.at("doc_span").is_null()) cu.doc_span = parse_span(u.at("doc_span"));
            cu.signature = u.at("signature");
            if (!u.at("docstring").is_null()) cu.docstring = u.at("docstring").get<std::string>();
            cu.line_count = u.at("line_count");
            if (!u.at("parent").is_null()) cu.parent = UnitId(u.at("parent").get<std::string>());
            cu.base_names = u.at("bases").get<std::vector<std::string>>();
            cu.child_count = u.at("child_count");
            cu.parse_degraded = u.at("degraded");
            cu.stub = u.at("stub");
            units.push_back(std::move(cu));
        }
        return RepoModel(std::move(snap), std::move(units));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptIndex, name + ": " + e.what());
    }
}

}  // namespace

nlohmann::ordered_json IndexManifest::to_json() const {
    nlohmann::ordered_json j;
    j["format_version"] = format_version;
    j["snapshot_hash"] = snapshot_hash;
    j["corpus_grammar_id"] = corpus_grammar_id;
    j["root"] = root;
    j["embedding"] = provider_id ? nlohmann::ordered_json{{"provider_id", *provider_id}, {"dim", dim}}
                                 : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json secs;
    for (const auto& [key, _] : kSections) {
        auto it = sections.find(key);
        if (it == sections.end()) continue;
        secs[key] = {{"file", it->second.file}, {"sha256", it->second.sha256}, {"bytes", it->second.bytes}};
    }
    j["sections"] = secs;
    j["built_at"] = built_at;
    j["config"] = config;
    return j;
}

IndexManifest IndexManifest::from_json(const nlohmann::json& j) {
    IndexManifest m;
    try {
        m.format_version = j.at("format_version");
        m.snapshot_hash = j.at("snapshot_hash");
        m.corpus_grammar_id = j.at("corpus_grammar_id");
        m.root = j.at("root");
        if (!j.at("embedding").is_null()) {
            m.provider_id = j["embedding"].at("provider_id").get<std::string>();
            m.dim = j["embedding"].at("dim");
        }
        for (const auto& [key, s] : j.at("sections").items())
            m.sections[key] = {s.at("file"), s.at("sha256"), s.at("bytes")};
        m.built_at = j.at("built_at");
        m.config = j.value("config", nlohmann::ordered_json::object());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptIndex, std::string("manifest: ") + e.what());
    }
    return m;
}

bool index_exists(const fs::path& dir) {
    std::error_code ec;
    return fs::is_regular_file(dir / kManifestFile, ec);
}

std::string serialize_units(const RepoModel& model) {
    const auto& snap = model.snapshot();
    nlohmann::ordered_json s;
    s["root"] = snap.root_path.generic_string();
    s["grammar"] = snap.corpus_grammar_id;
    s["hash"] = to_hex(snap.snapshot_hash);
    s["include"] = snap.include_globs;
    s["exclude"] = snap.exclude_globs;
    auto files = nlohmann::ordered_json::array();
    for (const auto& f : snap.files) {
        files.push_back({{"path", f.path},
                         {"lines", f.line_count},
                         {"sha256", to_hex(f.content_digest)},
                         {"module", f.module_path},
                         {"bytes", f.size_bytes},
                         {"language", language_name(f.language)}});
    }
    s["files"] = files;
    auto diags = nlohmann::ordered_json::array();
    for (const auto& d : snap.diagnostics) diags.push_back({d.path, d.reason});
    s["diagnostics"] = diags;

    auto units = nlohmann::ordered_json::array();
    for (const auto& u : model.units()) {
        nlohmann::ordered_json j;
        j["id"] = u.id.value;
        j["kind"] = to_string(u.kind);
        j["path"] = u.path;
        j["qualified_name"] = u.qualified_name;
        j["span"] = span_json(u.span);
        j["header_end"] = u.header_end;
        j["doc_span"] = u.doc_span ? span_json(*u.doc_span) : nlohmann::ordered_json(nullptr);
        j["signature"] = u.signature;
        j["docstring"] = u.docstring ? nlohmann::ordered_json(*u.docstring) : nlohmann::ordered_json(nullptr);
        j["line_count"] = u.line_count;
        j["parent"] = u.parent ? nlohmann::ordered_json(u.parent->value) : nlohmann::ordered_json(nullptr);
        j["bases"] = u.base_names;
        j["child_count"] = u.child_count;
        j["degraded"] = u.parse_degraded;
        j["stub"] = u.stub;
        units.push_back(std::move(j));
    }
    nlohmann::ordered_json doc;
    doc["format_version"] = kIndexFormatVersion;
    doc["snapshot"] = s;
    doc["units"] = units;
    return doc.dump() + "\n";
}

std::string serialize_graph(const RelationGraph& graph) {
    Writer w("graph");
    w.u32(static_cast<std::uint32_t>(graph.known_units().size()));
    for (const auto& u : graph.known_units()) w.str(u.value);
    w.u32(static_cast<std::uint32_t>(graph.edges().size()));
    for (const auto& e : graph.edges()) {
        w.str(e.src.value);
        w.str(e.dst.value);
        w.str(to_string(e.layer));
        w.str(e.site.path);
        w.i32(e.site.line);
    }
    w.u32(static_cast<std::uint32_t>(graph.unresolved().size()));
    for (const auto& r : graph.unresolved()) {
        w.str(to_string(r.layer));
        w.str(r.site.path);
        w.i32(r.site.line);
        w.str(r.text);
    }
    return w.take();
}

std::string serialize_sparse(const HybridIndex& index) {
    Writer w("sparse");
    write_sparse(w, index.file_level);
    write_sparse(w, index.symbol_level);
    return w.take();
}

std::string serialize_dense(const HybridIndex& index) {
    Writer w("dense");
    if (!index.dense) {
        w.str("");
        w.u32(0);
        w.u32(0);
        return w.take();
    }
    const auto& d = *index.dense;
    w.str(d.provider_id);
    w.u32(static_cast<std::uint32_t>(d.dim));
    w.u32(static_cast<std::uint32_t>(d.units.size()));
    for (std::size_t i = 0; i < d.units.size(); ++i) {
        w.str(d.units[i].value);
        for (int c = 0; c < d.dim; ++c) w.f64(d.vectors(static_cast<Eigen::Index>(i), c));
    }
    return w.take();
}

IndexManifest save_index(const fs::path& dir, const RepoModel& model, const RelationGraph& graph,
                         const HybridIndex& index, const nlohmann::ordered_json& config_echo) {
    fs::create_directories(dir);
    IndexManifest m;
    m.snapshot_hash = to_hex(model.snapshot().snapshot_hash);
    m.corpus_grammar_id = model.snapshot().corpus_grammar_id;
    m.root = model.snapshot().root_path.generic_string();
    if (index.dense) {
        m.provider_id = index.dense->provider_id;
        m.dim = index.dense->dim;
    }
    m.built_at = utc_now();
    m.config = config_echo;

    const std::string bodies[] = {serialize_units(model), serialize_graph(graph), serialize_sparse(index),
                                  serialize_dense(index)};
    for (std::size_t i = 0; i < 4; ++i) {
        write_all(dir / kSections[i][1], bodies[i]);
        m.sections[kSections[i][0]] = {kSections[i][1], to_hex(sha256(bodies[i])), bodies[i].size()};
    }
    write_all(dir / kManifestFile, m.to_json().dump(2) + "\n");
    return m;
}

IndexManifest read_manifest(const fs::path& dir) {
    if (!index_exists(dir)) throw Error(ErrorCode::IndexMissing, (dir / kManifestFile).string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_all(dir / kManifestFile));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptIndex, std::string("manifest: ") + e.what());
    }
    auto m = IndexManifest::from_json(j);
    if (m.format_version != kIndexFormatVersion)
        throw Error(ErrorCode::CorruptIndex, fmt::format("unsupported format_version {}", m.format_version));
    return m;
}

LoadedIndex load_index(const fs::path& dir, const Grammar& grammar, const LoadOptions& options) {
    LoadedIndex out;
    out.manifest = read_manifest(dir);
    const auto& m = out.manifest;

    std::map<std::string, std::string> bytes;
    for (const auto& [key, file] : kSections) {
        auto it = m.sections.find(key);
        if (it == m.sections.end()) throw Error(ErrorCode::CorruptIndex, std::string("manifest lacks section ") + key);
        auto body = read_all(dir / it->second.file);
        if (to_hex(sha256(body)) != it->second.sha256)
            throw Error(ErrorCode::CorruptIndex, std::string("digest mismatch in ") + it->second.file);
        bytes[key] = std::move(body);
    }

    out.model = parse_units(bytes["units"], "units.json");
    if (to_hex(out.model.snapshot().snapshot_hash) != m.snapshot_hash)
        throw Error(ErrorCode::CorruptIndex, "units.json does not match the manifest snapshot");

    {
        Reader r(bytes["graph"], "graph", "graph.bin");
        std::vector<UnitId> known;
        for (auto n = r.u32(); n > 0; --n) known.emplace_back(r.str());
        std::vector<RelationEdge> edges;
        for (auto n = r.u32(); n > 0; --n) {
            RelationEdge e;
            e.src = UnitId(r.str());
            e.dst = UnitId(r.str());
            auto layer = parse_layer(r.str());
            if (!layer) r.fail("unknown layer");
            e.layer = *layer;
            e.site.path = r.str();
            e.site.line = r.i32();
            edges.push_back(std::move(e));
        }
        std::vector<UnresolvedRef> unresolved;
        for (auto n = r.u32(); n > 0; --n) {
            UnresolvedRef u;
            auto layer = parse_layer(r.str());
            if (!layer) r.fail("unknown layer");
            u.layer = *layer;
            u.site.path = r.str();
            u.site.line = r.i32();
            u.text = r.str();
            unresolved.push_back(std::move(u));
        }
        r.done();
        out.graph = RelationGraph(std::move(known), std::move(edges), std::move(unresolved));
    }
    {
        Reader r(bytes["sparse"], "sparse", "sparse.bin");
        out.index.file_level = read_sparse(r);
        out.index.symbol_level = read_sparse(r);
        r.done();
    }
    {
        Reader r(bytes["dense"], "dense", "dense.bin");
        DenseIndex d;
        d.provider_id = r.str();
        d.dim = static_cast<int>(r.u32());
        auto n = r.u32();
        d.vectors = Eigen::MatrixXd::Zero(n, d.dim);
        for (std::uint32_t i = 0; i < n; ++i) {
            d.units.emplace_back(r.str());
            for (int c = 0; c < d.dim; ++c) d.vectors(i, c) = r.f64();
        }
        r.done();
        if (!d.provider_id.empty()) out.index.dense = std::move(d);
    }

    if (!options.allow_stale) {
        const auto& snap = out.model.snapshot();
        ScanOptions scan;
        scan.include_globs = snap.include_globs;
        const auto& defaults = default_excludes();
        for (const auto& g : snap.exclude_globs)
            if (std::find(defaults.begin(), defaults.end(), g) == defaults.end()) scan.exclude_globs.push_back(g);
        std::string current;
        try {
            current = to_hex(scan_repository(snap.root_path, scan, grammar).snapshot_hash);
        } catch (const Error& e) {
            throw Error(ErrorCode::StaleIndex, std::string("cannot rescan repository: ") + e.what());
        }
        if (current != m.snapshot_hash)
            throw Error(ErrorCode::StaleIndex, "repository changed since indexing; re-index or pass --allow-stale");
    }
    return out;
}

}  // namespace reponav
