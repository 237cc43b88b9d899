#pragma once

// Silver optical constants, 400-900 nm in 5 nm steps.
// Source: K. M. McPeak et al., ACS Photonics 2, 326 (2015), thermally evaporated
// template-stripped Ag, as distributed by refractiveindex.info.
// Columns: vacuum wavelength (nm), n, k.

#include <array>

namespace dipolestack::data {

struct IndexRow {
  double wavelength_nm;
  double n;
  double k;
};

inline constexpr std::array<IndexRow, 101> kSilverMcPeak{{
    {400.0, 0.045729, 2.122944},
    {405.0, 0.045124, 2.182385},
    {410.0, 0.044520, 2.241826},
    {415.0, 0.043903, 2.299490},
    {420.0, 0.043287, 2.357154},
    {425.0, 0.042640, 2.411233},
    {430.0, 0.041993, 2.465312},
    {435.0, 0.041547, 2.519288},
    {440.0, 0.041101, 2.573264},
    {445.0, 0.041017, 2.624511},
    {450.0, 0.040932, 2.675757},
    {455.0, 0.040945, 2.726356},
    {460.0, 0.040957, 2.776955},
    {465.0, 0.040842, 2.825354},
    {470.0, 0.040727, 2.873753},
    {475.0, 0.040754, 2.922967},
    {480.0, 0.040781, 2.972182},
    {485.0, 0.041016, 3.019258},
    {490.0, 0.041250, 3.066334},
    {495.0, 0.041311, 3.112867},
    {500.0, 0.041373, 3.159401},
    {505.0, 0.041488, 3.205256},
    {510.0, 0.041603, 3.251112},
    {515.0, 0.041988, 3.296618},
    {520.0, 0.042373, 3.342124},
    {525.0, 0.042288, 3.387656},
    {530.0, 0.042204, 3.433188},
    {535.0, 0.042804, 3.477693},
    {540.0, 0.043403, 3.522199},
    {545.0, 0.043610, 3.566156},
    {550.0, 0.043817, 3.610114},
    {555.0, 0.044162, 3.653568},
    {560.0, 0.044507, 3.697023},
    {565.0, 0.045240, 3.740476},
    {570.0, 0.045973, 3.783928},
    {575.0, 0.046397, 3.827306},
    {580.0, 0.046820, 3.870684},
    {585.0, 0.046830, 3.913927},
    {590.0, 0.046840, 3.957170},
    {595.0, 0.047125, 3.999553},
    {600.0, 0.047410, 4.041936},
    {605.0, 0.048198, 4.084121},
    {610.0, 0.048986, 4.126306},
    {615.0, 0.049302, 4.167640},
    {620.0, 0.049618, 4.208974},
    {625.0, 0.050360, 4.251031},
    {630.0, 0.051102, 4.293089},
    {635.0, 0.051374, 4.334961},
    {640.0, 0.051647, 4.376833},
    {645.0, 0.051280, 4.418528},
    {650.0, 0.050913, 4.460223},
    {655.0, 0.052151, 4.501667},
    {660.0, 0.053389, 4.543110},
    {665.0, 0.052932, 4.583413},
    {670.0, 0.052475, 4.623716},
    {675.0, 0.053347, 4.664832},
    {680.0, 0.054219, 4.705947},
    {685.0, 0.054324, 4.747183},
    {690.0, 0.054429, 4.788420},
    {695.0, 0.054645, 4.828753},
    {700.0, 0.054860, 4.869087},
    {705.0, 0.055699, 4.909932},
    {710.0, 0.056539, 4.950777},
    {715.0, 0.056970, 4.992495},
    {720.0, 0.057401, 5.034212},
    {725.0, 0.057567, 5.073683},
    {730.0, 0.057733, 5.113153},
    {735.0, 0.058681, 5.154246},
    {740.0, 0.059629, 5.195340},
    {745.0, 0.059872, 5.234885},
    {750.0, 0.060114, 5.274430},
    {755.0, 0.059580, 5.315624},
    {760.0, 0.059047, 5.356817},
    {765.0, 0.061436, 5.396499},
    {770.0, 0.063824, 5.436182},
    {775.0, 0.063644, 5.474585},
    {780.0, 0.063465, 5.512987},
    {785.0, 0.062841, 5.555907},
    {790.0, 0.062217, 5.598828},
    {795.0, 0.063084, 5.638476},
    {800.0, 0.063951, 5.678124},
    {805.0, 0.065712, 5.715716},
    {810.0, 0.067473, 5.753308},
    {815.0, 0.067555, 5.794769},
    {820.0, 0.067636, 5.836229},
    {825.0, 0.067913, 5.873772},
    {830.0, 0.068190, 5.911315},
    {835.0, 0.067832, 5.953430},
    {840.0, 0.067475, 5.995544},
    {845.0, 0.068805, 6.036025},
    {850.0, 0.070136, 6.076505},
    {855.0, 0.070319, 6.115913},
    {860.0, 0.070503, 6.155321},
    {865.0, 0.071479, 6.195482},
    {870.0, 0.072455, 6.235643},
    {875.0, 0.073199, 6.274619},
    {880.0, 0.073944, 6.313594},
    {885.0, 0.074436, 6.351700},
    {890.0, 0.074928, 6.389805},
    {895.0, 0.074861, 6.429505},
    {900.0, 0.074794, 6.469204},
}};

}  // namespace dipolestack::data
