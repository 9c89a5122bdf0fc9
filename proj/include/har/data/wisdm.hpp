#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "har/core/error.hpp"
#include "har/data/dataset.hpp"

namespace har {

/// Result of parsing raw sensor logs: per-(subject, activity-run) streams
/// plus the name->id mapping and parse bookkeeping.
struct RawStreams {
    std::vector<Stream> streams;
    std::vector<std::string> class_names;  // sorted; index = class id
    int64_t lines_total = 0;
    int64_t lines_malformed = 0;
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

inline bool parse_long(const std::string& s, int64_t& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtoll(s.c_str(), &end, 10);
    return end == s.c_str() + s.size();
}

struct WisdmRecord {
    int subject;
    std::string activity;
    double x, y, z;
};

// `user,activity,timestamp,x,y,z` — trailing `;` handled by the caller.
inline bool parse_wisdm_record(const std::string& rec, WisdmRecord& out) {
    std::vector<std::string> fields;
    std::stringstream ss(rec);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    if (fields.size() != 6) return false;
    int64_t subj = 0, ts = 0;
    if (!parse_long(fields[0], subj)) return false;
    if (fields[1].empty()) return false;
    if (!parse_long(fields[2], ts)) return false;
    double x, y, z;
    if (!parse_double(fields[3], x) || !parse_double(fields[4], y) || !parse_double(fields[5], z))
        return false;
    out = {static_cast<int>(subj), fields[1], x, y, z};
    return true;
}

}  // namespace detail

/// Parses WISDM v1.1 raw accelerometer logs. Records follow
/// `user,activity,timestamp,x,y,z;` with the trailing semicolon optional;
/// a line may carry several `;`-separated records. Malformed records are
/// counted and skipped; more than 10% malformed aborts with the count.
/// Consecutive samples with the same (subject, activity) form one stream;
/// activity names map to class ids in sorted-name order.
inline RawStreams load_wisdm_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open WISDM file: ", path);

    struct Sample {
        int subject;
        std::string activity;
        float x, y, z;
    };
    std::vector<Sample> samples;
    RawStreams out;

    std::string line;
    while (std::getline(in, line)) {
        line = detail::trim(line);
        if (line.empty()) continue;
        std::stringstream recs(line);
        std::string rec;
        while (std::getline(recs, rec, ';')) {
            rec = detail::trim(rec);
            if (rec.empty()) continue;
            ++out.lines_total;
            detail::WisdmRecord r;
            if (!detail::parse_wisdm_record(rec, r)) {
                ++out.lines_malformed;
                continue;
            }
            samples.push_back({r.subject, r.activity, static_cast<float>(r.x),
                               static_cast<float>(r.y), static_cast<float>(r.z)});
        }
    }
    require(out.lines_total > 0, "WISDM file contains no records: ", path);
    require(out.lines_malformed * 10 <= out.lines_total,
            "WISDM file ", path, ": ", out.lines_malformed, " of ", out.lines_total,
            " records malformed (>10%)");

    std::vector<std::string> names;
    for (const auto& s : samples)
        if (std::find(names.begin(), names.end(), s.activity) == names.end())
            names.push_back(s.activity);
    std::sort(names.begin(), names.end());
    out.class_names = names;
    auto class_id = [&](const std::string& n) {
        return static_cast<int>(std::find(names.begin(), names.end(), n) - names.begin());
    };

    // break into runs on any (subject, activity) change
    size_t i = 0;
    while (i < samples.size()) {
        size_t j = i;
        while (j < samples.size() && samples[j].subject == samples[i].subject &&
               samples[j].activity == samples[i].activity)
            ++j;
        const int T = static_cast<int>(j - i);
        Stream st;
        st.subject = samples[i].subject;
        st.values = TensorF({3, T});
        st.labels.assign(static_cast<size_t>(T), class_id(samples[i].activity));
        for (int t = 0; t < T; ++t) {
            st.values.at(0, t) = samples[i + static_cast<size_t>(t)].x;
            st.values.at(1, t) = samples[i + static_cast<size_t>(t)].y;
            st.values.at(2, t) = samples[i + static_cast<size_t>(t)].z;
        }
        out.streams.push_back(std::move(st));
        i = j;
    }
    return out;
}

/// Generic schema for pre-exported datasets: header `label,subject,ch0..chN`,
/// one sample per row. Runs split on (subject, label) change as for WISDM.
inline RawStreams load_generic_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open CSV file: ", path);
    std::string header;
    require(static_cast<bool>(std::getline(in, header)), "CSV file is empty: ", path);

    std::vector<std::string> cols;
    {
        std::stringstream ss(detail::trim(header));
        std::string f;
        while (std::getline(ss, f, ',')) cols.push_back(detail::trim(f));
    }
    require(cols.size() >= 3 && cols[0] == "label" && cols[1] == "subject",
            "CSV header must be `label,subject,ch0..chN`, got: ", header);
    const int C = static_cast<int>(cols.size()) - 2;

    struct Row {
        int label, subject;
        std::vector<float> ch;
    };
    std::vector<Row> rows;
    RawStreams out;
    std::string line;
    while (std::getline(in, line)) {
        line = detail::trim(line);
        if (line.empty()) continue;
        ++out.lines_total;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(detail::trim(f));
        int64_t label = 0, subject = 0;
        bool ok = fields.size() == cols.size() && detail::parse_long(fields[0], label) &&
                  detail::parse_long(fields[1], subject);
        Row r;
        if (ok) {
            r.label = static_cast<int>(label);
            r.subject = static_cast<int>(subject);
            r.ch.resize(static_cast<size_t>(C));
            for (int c = 0; c < C && ok; ++c) {
                double v;
                ok = detail::parse_double(fields[static_cast<size_t>(c) + 2], v);
                r.ch[static_cast<size_t>(c)] = static_cast<float>(v);
            }
        }
        if (!ok) {
            ++out.lines_malformed;
            continue;
        }
        rows.push_back(std::move(r));
    }
    require(out.lines_total > 0, "CSV file contains no data rows: ", path);
    require(out.lines_malformed * 10 <= out.lines_total,
            "CSV file ", path, ": ", out.lines_malformed, " of ", out.lines_total,
            " rows malformed (>10%)");

    size_t i = 0;
    while (i < rows.size()) {
        size_t j = i;
        while (j < rows.size() && rows[j].subject == rows[i].subject &&
               rows[j].label == rows[i].label)
            ++j;
        const int T = static_cast<int>(j - i);
        Stream st;
        st.subject = rows[i].subject;
        st.values = TensorF({C, T});
        st.labels.assign(static_cast<size_t>(T), rows[i].label);
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < C; ++c)
                st.values.at(c, t) = rows[i + static_cast<size_t>(t)].ch[static_cast<size_t>(c)];
        out.streams.push_back(std::move(st));
        i = j;
    }
    return out;
}

}  // namespace har
