#!/usr/bin/env python3
"""Regenerates the representative data tables in data/.

The tables stand in for radiative-transfer output, vendor detector curves, a
lunar albedo compilation and a night-lights raster, none of which ship with
the project. Values are smooth approximations chosen to sit in realistic
ranges; replace the files with real data where available.
"""
import math
import os
import sys

OUT = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data")

WAVELENGTHS = [405, 532, 670, 785, 830, 1060, 1550]
# Zenith optical depth for a rural sea-level atmosphere with 5 km visibility.
# 830 nm sits on the edge of a water-vapour band.
ZENITH_DEPTH = {405: 1.75, 532: 1.08, 670: 0.74, 785: 0.62, 830: 0.68, 1060: 0.40, 1550: 0.25}
ELEVATIONS = list(range(10, 91, 10))


def airmass(elevation_deg):
    # Kasten and Young (1989).
    zenith = 90.0 - elevation_deg
    return 1.0 / (math.cos(math.radians(zenith)) + 0.50572 * (96.07995 - zenith) ** -1.6364)


def fmt(values):
    return ", ".join(f"{v:.6g}" for v in values)


def write(path, lines):
    with open(os.path.join(OUT, path), "w") as f:
        f.write("\n".join(lines) + "\n")


def atmosphere():
    rows = [[math.exp(-ZENITH_DEPTH[w] * airmass(e)) for e in ELEVATIONS] for w in WAVELENGTHS]
    write("atmosphere_rural_5km.csv", [
        "# provenance: representative rural sea-level atmosphere, 5 km visibility;",
        "# provenance: exp(-tau(lambda) * airmass) with Kasten-Young airmass, not radiative-transfer output",
        "# wavelengths_nm: " + fmt(WAVELENGTHS),
        "# elevations_deg: " + fmt(ELEVATIONS),
    ] + [fmt(r) for r in rows])


def detectors():
    write("detector_thin_apd.csv", [
        "# provenance: representative thin silicon APD efficiency (approximate)",
        "# wavelengths_nm: 350, 405, 450, 500, 532",
        "0.2, 0.4, 0.49, 0.49, 0.45",
    ])
    write("detector_thick_apd.csv", [
        "# provenance: representative thick silicon APD efficiency (approximate)",
        "# wavelengths_nm: 400, 532, 600, 670, 700, 785, 830, 900, 1000, 1060, 1550",
        "0.2, 0.55, 0.64, 0.68, 0.68, 0.62, 0.5, 0.35, 0.1, 0.05, 0.02",
    ])


def moon():
    write("moon_albedo.csv", [
        "# provenance: effective lunar albedo vs illuminated fraction, folding the lunar phase law",
        "# provenance: into a single factor (approximate, full-moon normal albedo 0.12)",
        "# phase_fraction: 0, 0.25, 0.5, 0.75, 1",
        "0, 0.004, 0.012, 0.035, 0.12",
    ])


def light_pollution():
    # Synthetic upward spectral radiance (W m^-2 sr^-1 nm^-1) around Ottawa:
    # a Gaussian city core plus a secondary town and a rural floor.
    lats = [44.8 + 0.05 * i for i in range(21)]
    lons = [-76.5 + 0.05 * j for j in range(27)]
    km_per_deg = 111.32

    def radiance(lat, lon):
        def blob(lat0, lon0, peak, width_km):
            dy = (lat - lat0) * km_per_deg
            dx = (lon - lon0) * km_per_deg * math.cos(math.radians(lat0))
            return peak * math.exp(-(dx * dx + dy * dy) / (2 * width_km ** 2))
        return 4e-8 + blob(45.42, -75.70, 3.5e-6, 12.0) + blob(45.30, -75.90, 2e-7, 4.0)

    write("light_pollution_ottawa.csv", [
        "# provenance: synthetic night-lights grid around Ottawa for tests and defaults;",
        "# provenance: convert a real night-lights raster with 'qsat grid-convert' to replace it",
        "# latitudes_deg: " + fmt(lats),
        "# longitudes_deg: " + fmt(lons),
    ] + [fmt([radiance(a, o) for o in lons]) for a in lats])


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    atmosphere()
    detectors()
    moon()
    light_pollution()
