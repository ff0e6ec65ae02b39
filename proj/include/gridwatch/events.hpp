#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridwatch/capture.hpp"

// Dissects labeled captures into the indicator-event schema, derives the
// flow/window features, applies IT/OT/ET category masks and prepares labeled
// datasets for the classifier.
namespace gridwatch::events {

enum class Category { Global, IT, OT, ET };

struct Event {
    double timestamp = 0.0;
    std::string categorization;
    int priority = 4;
    std::optional<std::string> phase;
    std::optional<std::string> ttp;
    std::int64_t id = 0;
    std::string src_mac, dst_mac, src_ip, dst_ip;
    std::int64_t packet_length = 0;
    std::string protocol;
    std::optional<int> sport, dport;
    std::optional<int> window_size;
    std::optional<int> payload_size;
    std::optional<std::int64_t> diff_seq, diff_ack;
    std::optional<int> flag;
    std::optional<double> rtt;
    double frequency_general = 0.0;
    double frequency_proto = 0.0;
    double throughput = 0.0;
    std::optional<std::string> iec104_frame;
    std::optional<int> diff_tx, diff_rx;
    std::optional<int> iec104_type_id;
    std::optional<int> iec104_oa;
    std::optional<int> iec104_numix;
    std::optional<int> iec104_coa;
    std::optional<std::int64_t> iec104_ioa;
    std::optional<int> iec104_cot;
    std::optional<double> iec104_value_sigma;
    std::optional<double> iec104_io_value;
    std::optional<double> iec104_control;
    std::optional<double> iec104_status;

    // transport-only carriers for feature derivation; not part of the schema
    // and never serialized
    std::optional<std::uint32_t> raw_seq, raw_ack;
    std::optional<int> raw_iec_tx, raw_iec_rx;
};

// schema order of the 36 indicator fields
const std::vector<std::string>& field_names();
Category field_category(const std::string& field);

// detection classes, canonical order
const std::vector<std::string>& class_vocabulary();
// ground-truth TTP -> class name ("Normal" for none); throws on unknown TTPs
std::string class_of_ttp(const std::optional<std::string>& ttp);
// class -> MITRE phase used by the sequence detector
netsim::MitrePhase phase_of_class(const std::string& cls);

int priority_for_phase(const std::optional<std::string>& phase);

// One event per captured frame; derived fields left null.
std::vector<Event> dissect(const netsim::Capture& capture);

// Flow deltas, RTT, trailing-window frequencies/throughput, IEC sequence
// deltas and the value sigma. Events must be time-ordered.
void derive_features(std::vector<Event>& events);

struct CategoryMask {
    bool it = false;
    bool ot = false;
    bool et = false;

    std::string name() const;
    bool includes(Category c) const;
};

CategoryMask parse_mask(const std::string& name);  // e.g. "IT+OT+ET"
const std::vector<CategoryMask>& all_masks();      // the seven combinations

struct LabeledDataset {
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;  // index into class_names
    std::vector<std::string> class_names;
    std::map<std::string, std::vector<std::string>> vocabularies;  // per categorical column
    std::string mask_name;
};

class EmptyClass : public std::runtime_error {
public:
    explicit EmptyClass(const std::string& cls)
        : std::runtime_error("class without instances: " + cls) {}
};

// Feature matrix for the mask: global fields (minus phase/ttp/id identifiers
// and the ground-truth-derived priority) plus masked categories. Categorical
// columns are integer-encoded against a persisted vocabulary; nullable
// columns encode null as -1 next to a presence indicator column.
LabeledDataset apply_mask(const std::vector<Event>& events, const CategoryMask& mask);

// Seeded downsampling of every class to the minority-class count.
LabeledDataset balance_sample(const LabeledDataset& ds, std::uint64_t seed);

// One 0/1 indicator vector per class.
std::vector<std::vector<int>> binarize_labels(const LabeledDataset& ds);

std::string events_to_jsonl(const std::vector<Event>& events);
std::vector<Event> events_from_jsonl(const std::string& text);

std::string dataset_to_csv(const LabeledDataset& ds);

}  // namespace gridwatch::events
