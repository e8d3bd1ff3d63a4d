#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "structconf/applications.hpp"
#include "structconf/common.hpp"
#include "structconf/instances.hpp"
#include "structconf/tree_inference.hpp"

namespace structconf {

struct RawToken {
    std::string form;
    std::string pos;
    std::string tag;   // BIO tag, empty when absent
    int head = -1;     // gold head, -1 when absent
};

struct RawSentence {
    std::vector<RawToken> tokens;

    int length() const { return static_cast<int>(tokens.size()); }
};

// Dense interning of feature strings. Freeze after the training pass so
// test-time extraction can only reuse known ids.
class FeatureIndex {
public:
    int intern(const std::string& name) {
        auto it = ids_.find(name);
        if (it != ids_.end()) return it->second;
        if (frozen_) return -1;
        const int id = static_cast<int>(names_.size());
        ids_.emplace(name, id);
        names_.push_back(name);
        return id;
    }

    int lookup(const std::string& name) const {
        auto it = ids_.find(name);
        return it == ids_.end() ? -1 : it->second;
    }

    const std::string& name(int id) const { return names_.at(id); }
    int size() const { return static_cast<int>(names_.size()); }
    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }

private:
    std::unordered_map<std::string, int> ids_;
    std::vector<std::string> names_;
    bool frozen_ = false;
};

struct ChainColumns {
    int form = 0;
    int pos = 1;
    int tag = 2;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

// Repair a stray inside tag (no compatible phrase open) into a begin tag.
inline void repair_bio(RawSentence& sent, int sentence_index,
                       std::vector<std::string>* warnings) {
    for (std::size_t p = 0; p < sent.tokens.size(); ++p) {
        auto& tag = sent.tokens[p].tag;
        if (tag.size() < 2 || tag[0] != 'I') continue;
        const std::string type = tag.substr(2);
        bool open = false;
        if (p > 0) {
            const auto& prev = sent.tokens[p - 1].tag;
            open = prev.size() >= 2 && (prev[0] == 'B' || prev[0] == 'I') &&
                   prev.substr(2) == type;
        }
        if (!open) {
            tag[0] = 'B';
            if (warnings)
                warnings->push_back("sentence " + std::to_string(sentence_index) +
                                    " token " + std::to_string(p) +
                                    ": stray I tag treated as B");
        }
    }
}

}  // namespace detail

// Space-separated columns, blank line between sentences.
inline std::vector<RawSentence> read_conll_chain(
    const std::string& path, const ChainColumns& cols = {},
    std::vector<std::string>* warnings = nullptr) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::vector<RawSentence> sentences;
    RawSentence cur;
    std::string line;
    int line_no = 0;
    int expected_cols = -1;
    const int needed = std::max({cols.form, cols.pos, cols.tag}) + 1;
    const auto flush = [&]() {
        if (cur.tokens.empty()) return;
        detail::repair_bio(cur, static_cast<int>(sentences.size()), warnings);
        sentences.push_back(std::move(cur));
        cur = {};
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto fields = detail::split_ws(line);
        if (fields.empty()) {
            flush();
            continue;
        }
        if (expected_cols == -1) {
            expected_cols = static_cast<int>(fields.size());
            if (expected_cols < needed)
                throw ParseError("line " + std::to_string(line_no) +
                                 ": too few columns");
        }
        if (static_cast<int>(fields.size()) != expected_cols)
            throw ParseError("line " + std::to_string(line_no) +
                             ": ragged column count");
        RawToken tok;
        tok.form = fields[cols.form];
        tok.pos = fields[cols.pos];
        tok.tag = fields[cols.tag];
        cur.tokens.push_back(std::move(tok));
    }
    flush();
    return sentences;
}

inline void write_conll_chain(const std::string& path,
                              const std::vector<RawSentence>& sentences) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    for (const auto& sent : sentences) {
        for (const auto& tok : sent.tokens)
            out << tok.form << ' ' << tok.pos << ' ' << tok.tag << '\n';
        out << '\n';
    }
}

// CoNLL-X: 10 tab-separated columns, HEAD in column 7 (1-based).
inline std::vector<RawSentence> read_conll_dependency(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::vector<RawSentence> sentences;
    RawSentence cur;
    std::string line;
    int line_no = 0;
    const auto flush = [&]() {
        if (cur.tokens.empty()) return;
        const int n = cur.length();
        int root_children = 0;
        for (const auto& tok : cur.tokens) {
            if (tok.head < 0 || tok.head > n)
                throw ParseError("sentence " + std::to_string(sentences.size()) +
                                 ": head out of range");
            if (tok.head == 0) ++root_children;
        }
        if (root_children != 1)
            throw ParseError("sentence " + std::to_string(sentences.size()) +
                             ": expected exactly one root child, found " +
                             std::to_string(root_children));
        for (int d = 1; d <= n; ++d) {
            int v = d, steps = 0;
            while (v != 0 && steps <= n) {
                v = cur.tokens[v - 1].head;
                ++steps;
            }
            if (v != 0)
                throw ParseError("sentence " + std::to_string(sentences.size()) +
                                 ": cyclic head assignment");
        }
        sentences.push_back(std::move(cur));
        cur = {};
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            flush();
            continue;
        }
        const auto fields = detail::split_tabs(line);
        if (fields.size() != 10)
            throw ParseError("line " + std::to_string(line_no) +
                             ": expected 10 tab-separated columns");
        RawToken tok;
        tok.form = fields[1];
        tok.pos = fields[4];
        try {
            tok.head = std::stoi(fields[6]);
        } catch (const std::exception&) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": non-integer head");
        }
        cur.tokens.push_back(std::move(tok));
    }
    flush();
    return sentences;
}

inline void write_conll_dependency(const std::string& path,
                                   const std::vector<RawSentence>& sentences) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    for (const auto& sent : sentences) {
        for (int d = 1; d <= sent.length(); ++d) {
            const auto& tok = sent.tokens[d - 1];
            out << d << '\t' << tok.form << '\t' << '_' << '\t' << '_' << '\t'
                << tok.pos << '\t' << '_' << '\t' << tok.head << '\t' << '_'
                << '\t' << '_' << '\t' << '_' << '\n';
        }
        out << '\n';
    }
}

namespace detail {

inline const std::string& padded(const RawSentence& s, int p, bool form) {
    static const std::string kPad = "<PAD>";
    if (p < 0 || p >= s.length()) return kPad;
    return form ? s.tokens[p].form : s.tokens[p].pos;
}

inline void add_feature(SparseVector& v, FeatureIndex& index, const std::string& name) {
    const int id = index.intern(name);
    if (id >= 0) v.add(id, 1.0);
}

inline bool has_upper(const std::string& s) {
    return !s.empty() && std::isupper(static_cast<unsigned char>(s[0]));
}
inline bool all_upper(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (std::islower(static_cast<unsigned char>(c))) return false;
    return true;
}
inline bool has_digit(const std::string& s) {
    for (char c : s)
        if (std::isdigit(static_cast<unsigned char>(c))) return true;
    return false;
}

}  // namespace detail

// Windowed word/POS identity, affixes, and orthographic flags per (position,
// label); one indicator per label bigram.
inline ChainInstance extract_chain_features(const RawSentence& raw, const TagSet& tags,
                                            FeatureIndex& index) {
    const int n = raw.length();
    const int L = tags.label_count();
    ChainInstance x(n, L);
    for (int p = 0; p < n; ++p) {
        const std::string& w = raw.tokens[p].form;
        std::vector<std::string> parts;
        for (int off = -2; off <= 2; ++off) {
            const std::string o = std::to_string(off);
            parts.push_back("w[" + o + "]=" + detail::padded(raw, p + off, true));
            parts.push_back("p[" + o + "]=" + detail::padded(raw, p + off, false));
        }
        for (std::size_t len = 2; len <= 4 && len <= w.size(); ++len) {
            parts.push_back("pre" + std::to_string(len) + "=" + w.substr(0, len));
            parts.push_back("suf" + std::to_string(len) + "=" + w.substr(w.size() - len));
        }
        if (detail::has_upper(w)) parts.push_back("cap");
        if (detail::all_upper(w)) parts.push_back("allcaps");
        if (detail::has_digit(w)) parts.push_back("digit");
        if (w.find('-') != std::string::npos) parts.push_back("hyphen");

        for (int y = 0; y < L; ++y) {
            const std::string suffix = "|y=" + tags.tag_name(y);
            for (const auto& part : parts)
                detail::add_feature(x.node_feat(p, y), index, part + suffix);
        }
        if (!raw.tokens[p].tag.empty()) x.gold[p] = tags.label_of(raw.tokens[p].tag);
    }
    for (int q = 1; q < n; ++q)
        for (int prev = 0; prev < L; ++prev)
            for (int cur = 0; cur < L; ++cur)
                detail::add_feature(x.trans_feat(q, prev, cur), index,
                                    "t=" + tags.tag_name(prev) + ">" + tags.tag_name(cur));
    return x;
}

// Edge-factored word/POS pairs with direction and bucketed distance.
inline TreeInstance extract_tree_features(const RawSentence& raw, FeatureIndex& index) {
    const int n = raw.length();
    TreeInstance x(n);
    static const std::string kRoot = "<ROOT>";
    const auto form = [&](int i) -> const std::string& {
        return i == 0 ? kRoot : raw.tokens[i - 1].form;
    };
    const auto pos = [&](int i) -> const std::string& {
        return i == 0 ? kRoot : raw.tokens[i - 1].pos;
    };
    for (int h = 0; h <= n; ++h)
        for (int d = 1; d <= n; ++d) {
            if (h == d) continue;
            auto& v = x.edge_feat(h, d);
            const int dist = d - h;
            const int bucket = std::min(std::abs(dist), 5);
            const std::string dir = dist > 0 ? "R" : "L";
            const std::string ctx = dir + std::to_string(bucket);
            detail::add_feature(v, index, "hf=" + form(h) + "|df=" + form(d));
            detail::add_feature(v, index, "hp=" + pos(h) + "|dp=" + pos(d));
            detail::add_feature(v, index, "hf=" + form(h) + "|dp=" + pos(d));
            detail::add_feature(v, index, "hp=" + pos(h) + "|df=" + form(d));
            detail::add_feature(v, index,
                                "hp=" + pos(h) + "|dp=" + pos(d) + "|" + ctx);
            detail::add_feature(v, index, "dir=" + ctx);
            if (d > 1)
                detail::add_feature(v, index,
                                    "hp=" + pos(h) + "|dp-1=" + pos(d - 1));
        }
    for (int d = 1; d <= n; ++d)
        if (raw.tokens[d - 1].head >= 0) x.gold_heads[d - 1] = raw.tokens[d - 1].head;
    return x;
}

// Deterministic splitmix-style generator for the synthetic corpora.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix64(seed ^ 0x6d6f636bull)) {}

    std::uint64_t next() {
        state_ = mix64(state_);
        return state_;
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    int below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }

private:
    std::uint64_t state_;
};

enum class SynthMode { chain, tree };

struct SynthConfig {
    SynthMode mode = SynthMode::chain;
    int n_train = 1000;
    int n_dev = 200;
    int n_test = 200;
    int min_len = 3;
    int max_len = 10;
    int entity_types = 2;       // chain mode
    int words_per_label = 20;   // chain mode vocabulary block size
    int vocabulary = 50;        // tree mode
    double entity_continue = 0.5;  // chain mode, P(stay inside an entity)
    double noise = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_train < 1 || n_dev < 0 || n_test < 0) throw ConfigError("bad split sizes");
        if (min_len < 1 || max_len < min_len) throw ConfigError("bad length range");
        if (noise < 0.0 || noise > 1.0) throw ConfigError("noise must be in [0,1]");
        if (entity_continue < 0.0 || entity_continue >= 1.0)
            throw ConfigError("entity_continue must be in [0,1)");
        if (entity_types < 1 || words_per_label < 1 || vocabulary < 2)
            throw ConfigError("bad vocabulary parameters");
    }
};

struct SynthCorpus {
    TagSet tags;
    std::vector<RawSentence> train, dev, test;
};

// Markov transition matrix over BIO labels used by the chain generator;
// exposed so statistical tests can compute exact expected marginals.
inline std::vector<std::vector<double>> synth_chain_transitions(
    const TagSet& tags, double continue_inside = 0.5) {
    const int L = tags.label_count();
    const double start_entity = 0.4;
    std::vector<std::vector<double>> T(L, std::vector<double>(L, 0.0));
    const int types = static_cast<int>(tags.types.size());
    for (int y = 0; y < L; ++y) {
        // from inside an entity: continue it or fall back to the outside row
        if (!tags.is_outside(y)) {
            const int cont = tags.inside_label(tags.type_of(y));
            T[y][cont] = continue_inside;
            T[y][tags.outside()] = (1.0 - continue_inside) * (1.0 - start_entity);
            for (int k = 0; k < types; ++k)
                T[y][tags.begin_label(k)] =
                    (1.0 - continue_inside) * start_entity / types;
        } else {
            T[y][tags.outside()] = 1.0 - start_entity;
            for (int k = 0; k < types; ++k)
                T[y][tags.begin_label(k)] = start_entity / types;
        }
    }
    return T;
}

inline std::vector<double> synth_chain_start(const TagSet& tags) {
    const int L = tags.label_count();
    std::vector<double> pi(L, 0.0);
    pi[tags.outside()] = 0.6;
    const int types = static_cast<int>(tags.types.size());
    for (int k = 0; k < types; ++k) pi[tags.begin_label(k)] = 0.4 / types;
    return pi;
}

namespace detail {

inline int sample_categorical(Rng& rng, const std::vector<double>& probs) {
    double u = rng.uniform();
    for (std::size_t i = 0; i < probs.size(); ++i) {
        u -= probs[i];
        if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

inline RawSentence synth_chain_sentence(Rng& rng, const SynthConfig& cfg,
                                        const TagSet& tags,
                                        const std::vector<double>& start,
                                        const std::vector<std::vector<double>>& T) {
    const int n = cfg.min_len + rng.below(cfg.max_len - cfg.min_len + 1);
    const int L = tags.label_count();
    RawSentence sent;
    int y = sample_categorical(rng, start);
    for (int p = 0; p < n; ++p) {
        if (p > 0) y = sample_categorical(rng, T[y]);
        // each label owns a block of word ids; noise emits from a random block
        const int block = rng.uniform() < cfg.noise ? rng.below(L) : y;
        const int word = block * cfg.words_per_label + rng.below(cfg.words_per_label);
        RawToken tok;
        tok.form = "w" + std::to_string(word);
        tok.pos = "p" + std::to_string(block);
        tok.tag = tags.tag_name(y);
        sent.tokens.push_back(std::move(tok));
    }
    return sent;
}

inline RawSentence synth_tree_sentence(Rng& rng, const SynthConfig& cfg,
                                       std::uint64_t affinity_seed) {
    const int n = cfg.min_len + rng.below(cfg.max_len - cfg.min_len + 1);
    RawSentence sent;
    std::vector<int> words(n);
    for (int d = 0; d < n; ++d) {
        words[d] = rng.below(cfg.vocabulary);
        RawToken tok;
        tok.form = "w" + std::to_string(words[d]);
        tok.pos = "p" + std::to_string(words[d] % 5);
        sent.tokens.push_back(std::move(tok));
    }
    // gold tree: decode a fixed word-affinity model, short edges preferred,
    // corrupted per-edge with noise-scaled jitter
    EdgeWeightMatrix w(n);
    for (int h = 0; h <= n; ++h)
        for (int d = 1; d <= n; ++d) {
            if (h == d) continue;
            const int hw = h == 0 ? cfg.vocabulary : words[h - 1];
            const std::uint64_t key =
                derive_seed(affinity_seed, static_cast<std::uint64_t>(hw) * 131071ull,
                            static_cast<std::uint64_t>(words[d - 1]));
            const double affinity =
                static_cast<double>(key >> 11) * 0x1.0p-53;  // in [0,1)
            const double dist_penalty = 0.15 * std::abs(d - h);
            const double jitter = cfg.noise * rng.uniform();
            w.at(h, d) = 2.0 * affinity - dist_penalty + jitter;
        }
    const auto gold = cle_decode(w);
    for (int d = 1; d <= n; ++d) sent.tokens[d - 1].head = gold.heads[d - 1];
    return sent;
}

}  // namespace detail

inline SynthCorpus generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    SynthCorpus corpus;
    for (int k = 0; k < cfg.entity_types; ++k)
        corpus.tags.types.push_back("T" + std::to_string(k));
    Rng rng(cfg.seed);
    const auto start = synth_chain_start(corpus.tags);
    const auto T = synth_chain_transitions(corpus.tags, cfg.entity_continue);
    const std::uint64_t affinity_seed = mix64(cfg.seed ^ 0x7472656555ull);
    const auto draw = [&]() {
        return cfg.mode == SynthMode::chain
                   ? detail::synth_chain_sentence(rng, cfg, corpus.tags, start, T)
                   : detail::synth_tree_sentence(rng, cfg, affinity_seed);
    };
    for (int i = 0; i < cfg.n_train; ++i) corpus.train.push_back(draw());
    for (int i = 0; i < cfg.n_dev; ++i) corpus.dev.push_back(draw());
    for (int i = 0; i < cfg.n_test; ++i) corpus.test.push_back(draw());
    return corpus;
}

}  // namespace structconf
