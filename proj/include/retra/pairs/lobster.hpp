#pragma once

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "retra/errors.hpp"
#include "retra/io.hpp"

namespace retra {

// One asset's mid-price on a uniform grid. Timestamps are seconds after
// midnight; consecutive points differ by exactly the grid step.
struct mid_series {
    std::vector<double> timestamps;
    std::vector<double> mid;
};

namespace detail {

inline double parse_field(const std::string& field, const std::string& file, std::size_t line_number) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw config_error(file + ":" + std::to_string(line_number) + ": malformed numeric field '" + field + "'");
    }
}

}

// Level-1 order-book ingestion. The message file rows are
// time,type,order-id,size,price,direction and the orderbook file rows
// (ask-price,ask-size,bid-price,bid-size) describe the book after the same
// event; prices are integers in 1e-4 currency units. Only executed trades
// (types 4 and 5) define prices; their mid-quotes are carried forward onto a
// uniform grid spanning first to last trade.
inline mid_series ingest_mid_series(const std::string& message_path, const std::string& orderbook_path,
                                    double grid_seconds = 1.0) {
    if (!(grid_seconds > 0.0)) throw config_error("ingest_mid_series: grid step must be positive");
    std::ifstream messages(message_path);
    if (!messages) throw config_error("cannot open " + message_path);
    std::ifstream book(orderbook_path);
    if (!book) throw config_error("cannot open " + orderbook_path);

    std::vector<double> trade_times;
    std::vector<double> trade_mids;
    std::string message_line, book_line;
    std::size_t line_number = 0;
    while (std::getline(messages, message_line)) {
        ++line_number;
        if (!std::getline(book, book_line))
            throw config_error(orderbook_path + ": ends at line " + std::to_string(line_number) +
                               " while the message file continues");
        if (message_line.empty()) continue;

        const std::vector<std::string> message = split_csv_line(message_line);
        if (message.size() < 6)
            throw config_error(message_path + ":" + std::to_string(line_number) + ": expected 6 fields, got " +
                               std::to_string(message.size()));
        const double time = detail::parse_field(message[0], message_path, line_number);
        const double type = detail::parse_field(message[1], message_path, line_number);
        if (type != 4.0 && type != 5.0) continue; // only executions carry prices

        const std::vector<std::string> state = split_csv_line(book_line);
        if (state.size() < 4)
            throw config_error(orderbook_path + ":" + std::to_string(line_number) + ": expected 4 fields, got " +
                               std::to_string(state.size()));
        const double ask = detail::parse_field(state[0], orderbook_path, line_number);
        const double bid = detail::parse_field(state[2], orderbook_path, line_number);
        if (!trade_times.empty() && time < trade_times.back())
            throw config_error(message_path + ":" + std::to_string(line_number) + ": timestamps must not decrease");
        trade_times.push_back(time);
        trade_mids.push_back(0.5 * (ask + bid) * 1e-4);
    }
    if (trade_times.empty()) throw config_error(message_path + ": no trade events (types 4/5) found");

    mid_series series;
    const double start = trade_times.front();
    const double span = trade_times.back() - start;
    const auto points = static_cast<std::size_t>(std::floor(span / grid_seconds + 1e-9)) + 1;
    series.timestamps.reserve(points);
    series.mid.reserve(points);
    std::size_t cursor = 0;
    for (std::size_t k = 0; k < points; ++k) {
        const double t = start + static_cast<double>(k) * grid_seconds;
        while (cursor + 1 < trade_times.size() && trade_times[cursor + 1] <= t + 1e-9) ++cursor;
        series.timestamps.push_back(t);
        series.mid.push_back(trade_mids[cursor]);
    }
    return series;
}

// Two uniform series joined on their common span; each is carried forward
// onto the later start's grid.
struct pair_series {
    std::vector<double> timestamps;
    std::vector<double> first;
    std::vector<double> second;

    std::size_t size() const { return timestamps.size(); }
};

inline pair_series align_pair(const mid_series& a, const mid_series& b, double grid_seconds = 1.0) {
    if (a.timestamps.empty() || b.timestamps.empty()) throw config_error("align_pair: empty series");
    const double start = std::max(a.timestamps.front(), b.timestamps.front());
    const double stop = std::min(a.timestamps.back(), b.timestamps.back());
    if (stop < start) throw config_error("align_pair: series do not overlap");

    const auto sample = [&](const mid_series& s, double t) {
        // last observation at or before t; t is inside the series span
        std::size_t lo = 0, hi = s.timestamps.size() - 1;
        while (lo < hi) {
            const std::size_t mid_idx = (lo + hi + 1) / 2;
            if (s.timestamps[mid_idx] <= t + 1e-9)
                lo = mid_idx;
            else
                hi = mid_idx - 1;
        }
        return s.mid[lo];
    };

    pair_series out;
    const auto points = static_cast<std::size_t>(std::floor((stop - start) / grid_seconds + 1e-9)) + 1;
    out.timestamps.reserve(points);
    out.first.reserve(points);
    out.second.reserve(points);
    for (std::size_t k = 0; k < points; ++k) {
        const double t = start + static_cast<double>(k) * grid_seconds;
        out.timestamps.push_back(t);
        out.first.push_back(sample(a, t));
        out.second.push_back(sample(b, t));
    }
    return out;
}

inline void write_pair_csv(const std::string& path, const pair_series& series) {
    std::ofstream out = open_output(path);
    out << "t,S1,S2\n";
    for (std::size_t i = 0; i < series.size(); ++i)
        out << format_g12(series.timestamps[i]) << "," << format_g12(series.first[i]) << ","
            << format_g12(series.second[i]) << "\n";
}

inline pair_series read_pair_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "t,S1,S2")
        throw config_error(path + ": expected header t,S1,S2");
    pair_series series;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != 3)
            throw config_error(path + ":" + std::to_string(line_number) + ": expected 3 fields");
        series.timestamps.push_back(detail::parse_field(fields[0], path, line_number));
        series.first.push_back(detail::parse_field(fields[1], path, line_number));
        series.second.push_back(detail::parse_field(fields[2], path, line_number));
    }
    if (series.size() < 2) throw config_error(path + ": need at least two rows");
    return series;
}

}
