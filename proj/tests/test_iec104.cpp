#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "gridwatch/iec104.hpp"
#include "gridwatch/rng.hpp"

using namespace gridwatch;
using namespace gridwatch::iec104;

namespace {

Apdu random_apdu(Rng& rng) {
    Apdu apdu;
    const int kind = static_cast<int>(rng.uniform_int(0, 4));
    if (kind == 0) {
        static const UFunction fns[] = {UFunction::StartDtAct, UFunction::StartDtCon,
                                        UFunction::StopDtAct, UFunction::StopDtCon,
                                        UFunction::TestFrAct, UFunction::TestFrCon};
        apdu.control = UFrame{fns[rng.uniform_int(0, 5)]};
        return apdu;
    }
    if (kind == 1) {
        apdu.control = SFrame{static_cast<std::uint16_t>(rng.uniform_int(0, 32767))};
        return apdu;
    }
    apdu.control = IFrame{static_cast<std::uint16_t>(rng.uniform_int(0, 32767)),
                          static_cast<std::uint16_t>(rng.uniform_int(0, 32767))};
    static const TypeId types[] = {TypeId::M_SP_NA_1, TypeId::M_ME_NB_1, TypeId::M_ME_NF_1,
                                   TypeId::C_SC_NA_1, TypeId::C_SE_NC_1};
    static const Cot cots[] = {Cot::Cyclic, Cot::Spontaneous, Cot::Activation,
                               Cot::ActivationCon, Cot::ActivationTerm};
    Asdu asdu;
    asdu.type_id = types[rng.uniform_int(0, 4)];
    asdu.cot = cots[rng.uniform_int(0, 4)];
    asdu.sq_flag = rng.uniform() < 0.3;
    asdu.origin_address = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    asdu.common_address = static_cast<std::uint16_t>(rng.uniform_int(1, 65534));
    const int n = static_cast<int>(rng.uniform_int(1, 5));
    const std::uint32_t base = static_cast<std::uint32_t>(rng.uniform_int(0, 1000000));
    for (int i = 0; i < n; ++i) {
        InformationObject io;
        io.ioa = asdu.sq_flag ? base + static_cast<std::uint32_t>(i)
                              : static_cast<std::uint32_t>(rng.uniform_int(0, 16777215));
        switch (asdu.type_id) {
            case TypeId::M_SP_NA_1:
                io.value = SinglePoint{rng.uniform() < 0.5,
                                       static_cast<std::uint8_t>(rng.uniform_int(0, 15) << 4)};
                break;
            case TypeId::M_ME_NB_1:
                io.value = ScaledValue{static_cast<std::int16_t>(rng.uniform_int(-32768, 32767)),
                                       static_cast<std::uint8_t>(rng.uniform_int(0, 255))};
                break;
            case TypeId::M_ME_NF_1:
            case TypeId::C_SE_NC_1:
                io.value = ShortFloat{static_cast<float>(rng.uniform(-1000.0, 1000.0)),
                                      static_cast<std::uint8_t>(rng.uniform_int(0, 255))};
                break;
            case TypeId::C_SC_NA_1:
                io.value = SingleCommand{rng.uniform() < 0.5,
                                         static_cast<std::uint8_t>(rng.uniform_int(0, 63) << 2)};
                break;
        }
        asdu.objects.push_back(io);
    }
    apdu.asdu = asdu;
    return apdu;
}

}  // namespace

TEST_CASE("control field encoding matches hand-derived layouts") {
    auto startdt = encode_control_field(UFrame{UFunction::StartDtAct});
    CHECK(startdt == std::array<std::uint8_t, 4>{0x07, 0x00, 0x00, 0x00});

    auto s1 = encode_control_field(SFrame{1});
    CHECK(s1 == std::array<std::uint8_t, 4>{0x01, 0x00, 0x02, 0x00});

    auto i00 = encode_control_field(IFrame{0, 0});
    CHECK(i00 == std::array<std::uint8_t, 4>{0x00, 0x00, 0x00, 0x00});
}

TEST_CASE("control field decoding") {
    const std::uint8_t con[4] = {0x0B, 0x00, 0x00, 0x00};
    auto d = decode_control_field(con);
    REQUIRE(d.status == DecodeStatus::Ok);
    CHECK(std::get<UFrame>(d.field).function == UFunction::StartDtCon);

    const std::uint8_t zero[4] = {0x00, 0x00, 0x00, 0x00};
    d = decode_control_field(zero);
    REQUIRE(d.status == DecodeStatus::Ok);
    CHECK(std::get<IFrame>(d.field) == IFrame{0, 0});

    // 0x03 selects the U format but carries no function bit
    const std::uint8_t bad[4] = {0x03, 0x00, 0x00, 0x00};
    d = decode_control_field(bad);
    CHECK(d.status == DecodeStatus::MalformedControl);

    // two function bits set
    const std::uint8_t two[4] = {0x0F, 0x00, 0x00, 0x00};
    d = decode_control_field(two);
    CHECK(d.status == DecodeStatus::MalformedControl);
}

TEST_CASE("apdu encoding: U frame byte vector") {
    Apdu apdu;
    apdu.control = UFrame{UFunction::StartDtAct};
    auto bytes = encode_apdu(apdu);
    CHECK(bytes == std::vector<std::uint8_t>{0x68, 0x04, 0x07, 0x00, 0x00, 0x00});
}

TEST_CASE("apdu encoding: short-float measurement frame") {
    // I(0,0), M_ME_NF_1, cot spontaneous, oa 0, coa 1, one object ioa=100 value 0.0
    Apdu apdu;
    apdu.control = IFrame{0, 0};
    Asdu asdu;
    asdu.type_id = TypeId::M_ME_NF_1;
    asdu.cot = Cot::Spontaneous;
    asdu.origin_address = 0;
    asdu.common_address = 1;
    asdu.objects.push_back(InformationObject{100, ShortFloat{0.0f, 0}});
    apdu.asdu = asdu;

    auto bytes = encode_apdu(apdu);
    // 4 control + 6 ASDU header + 8 object = 18 = 0x12
    const std::vector<std::uint8_t> expect = {
        0x68, 0x12, 0x00, 0x00, 0x00, 0x00,              // start, len, control
        0x0D, 0x01, 0x03, 0x00, 0x01, 0x00,              // type, vsq, cot, oa, coa
        0x64, 0x00, 0x00,                                // ioa = 100
        0x00, 0x00, 0x00, 0x00, 0x00,                    // float 0.0 + quality
    };
    CHECK(bytes == expect);
    CHECK(bytes[1] == 0x12);

    auto rt = decode_apdu(bytes);
    REQUIRE(rt.ok());
    CHECK(*rt.apdu == apdu);
    CHECK(rt.consumed == bytes.size());
}

TEST_CASE("apdu encoding: oversized frame rejected") {
    Apdu apdu;
    apdu.control = IFrame{0, 0};
    Asdu asdu;
    asdu.type_id = TypeId::M_ME_NF_1;
    asdu.cot = Cot::Cyclic;
    asdu.common_address = 1;
    // 31 non-sequenced short floats: 4 + 6 + 31*8 = 258 > 253
    for (int i = 0; i < 31; ++i)
        asdu.objects.push_back(InformationObject{static_cast<std::uint32_t>(i), ShortFloat{1.0f, 0}});
    apdu.asdu = asdu;
    CHECK_THROWS_AS(encode_apdu(apdu), FrameTooLarge);
}

TEST_CASE("apdu decoding: truncation and error paths") {
    const std::vector<std::uint8_t> u_con = {0x68, 0x04, 0x0B, 0x00, 0x00, 0x00};
    auto d = decode_apdu(u_con);
    REQUIRE(d.ok());
    CHECK(std::get<UFrame>(d.apdu->control).function == UFunction::StartDtCon);
    CHECK(d.consumed == 6);

    const std::vector<std::uint8_t> trunc = {0x68, 0x04, 0x0B};
    CHECK(decode_apdu(trunc).status == DecodeStatus::NeedMoreData);

    const std::vector<std::uint8_t> bad_start = {0x69, 0x04, 0x0B, 0x00, 0x00, 0x00};
    CHECK(decode_apdu(bad_start).status == DecodeStatus::BadStartByte);

    // unknown type id 99
    const std::vector<std::uint8_t> unk = {0x68, 0x0C, 0x00, 0x00, 0x00, 0x00,
                                           0x63, 0x01, 0x03, 0x00, 0x01, 0x00,
                                           0x64, 0x00};
    CHECK(decode_apdu(unk).status == DecodeStatus::UnsupportedTypeId);
}

TEST_CASE("round trip over randomized frames") {
    Rng rng(20240601);
    for (int i = 0; i < 2000; ++i) {
        const Apdu apdu = random_apdu(rng);
        const auto bytes = encode_apdu(apdu);
        CHECK(bytes[1] == bytes.size() - 2);
        auto d = decode_apdu(bytes);
        REQUIRE(d.ok());
        CHECK(*d.apdu == apdu);
        CHECK(d.consumed == bytes.size());
    }
}

TEST_CASE("prefix safety: strict prefixes decode to NeedMoreData") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        const auto bytes = encode_apdu(random_apdu(rng));
        for (std::size_t k = 0; k < bytes.size(); ++k) {
            auto d = decode_apdu(bytes.data(), k);
            CHECK(d.status == DecodeStatus::NeedMoreData);
        }
    }
}
