#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "structconf/applications.hpp"
#include "structconf/corpus.hpp"
#include "structconf/model.hpp"

namespace structconf {

// %.17g round-trips doubles exactly; used for every numeric field we emit.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct ModelFile {
    LinearModel model;
    FeatureIndex index;
    TagSet tags;
};

// Versioned text format: header, tag inventory, dense weight sections, then
// the feature index. Everything is line-oriented and deterministic.
inline void save_model(const std::string& path, const LinearModel& model,
                       const FeatureIndex& index, const TagSet& tags) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    out << "structconf-model 1\n";
    out << "dimension " << model.dimension() << '\n';
    out << "updates " << model.update_count() << '\n';
    out << "variance " << (model.has_variance() ? 1 : 0) << '\n';
    out << "types " << tags.types.size();
    for (const auto& t : tags.types) out << ' ' << t;
    out << '\n';
    const auto dump = [&](const char* name, const std::vector<double>& v) {
        out << name << '\n';
        for (double x : v) out << format_double(x) << '\n';
    };
    dump("mu", model.mu());
    dump("avg", model.avg_mu());
    if (model.has_variance()) dump("sigma", model.sigma_diag());
    out << "features " << index.size() << '\n';
    for (int f = 0; f < index.size(); ++f) out << index.name(f) << '\n';
}

inline ModelFile load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string word;
    int version = 0;
    in >> word >> version;
    if (word != "structconf-model" || version != 1)
        throw ParseError(path + ": not a model file");
    int dimension = 0, with_variance = 0;
    long updates = 0;
    std::size_t type_count = 0;
    in >> word >> dimension;
    if (word != "dimension") throw ParseError(path + ": bad header");
    in >> word >> updates;
    if (word != "updates") throw ParseError(path + ": bad header");
    in >> word >> with_variance;
    if (word != "variance") throw ParseError(path + ": bad header");
    in >> word >> type_count;
    if (word != "types") throw ParseError(path + ": bad header");

    ModelFile mf;
    for (std::size_t k = 0; k < type_count; ++k) {
        in >> word;
        mf.tags.types.push_back(word);
    }
    mf.model = LinearModel(dimension, with_variance != 0);
    mf.model.set_update_count(updates);
    const auto slurp = [&](const char* name, std::vector<double>& v) {
        in >> word;
        if (word != name) throw ParseError(path + ": expected " + name + " section");
        for (double& x : v)
            if (!(in >> x)) throw ParseError(path + ": truncated " + name + " section");
    };
    slurp("mu", mf.model.mu());
    slurp("avg", mf.model.avg_mu());
    if (with_variance) slurp("sigma", mf.model.sigma_diag());

    int feature_count = 0;
    in >> word >> feature_count;
    if (word != "features") throw ParseError(path + ": bad feature section");
    std::getline(in, word);  // eat end of line
    for (int f = 0; f < feature_count; ++f) {
        std::string name;
        if (!std::getline(in, name)) throw ParseError(path + ": truncated index");
        if (mf.index.intern(name) != f) throw ParseError(path + ": duplicate feature");
    }
    mf.index.freeze();
    if (feature_count != dimension)
        throw ParseError(path + ": index size does not match dimension");
    return mf;
}

}  // namespace structconf
