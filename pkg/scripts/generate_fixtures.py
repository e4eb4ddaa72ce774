"""Regenerate the FCIDUMP fixtures and their manifest.

Needs pyscf, which is not a runtime dependency of mifno:

    pip install pyscf
    python scripts/generate_fixtures.py
"""

import json
import sys
from pathlib import Path

import pyscf
from pyscf import ao2mo, cc, gto, mcscf, mp, scf
from pyscf.tools import fcidump

OUT = Path(__file__).resolve().parents[1] / "src" / "mifno" / "fixtures"

# Experimental geometries (angstrom) from NIST CCCBDB; H4 is a synthetic
# rectangle used as a 4-orbital / 4-electron toy.
MOLECULES = {
    "h2_sto3g": dict(atom="H 0 0 0; H 0 0 0.7414", basis="sto-3g",
                     source="NIST CCCBDB experimental r(HH)=0.7414 A"),
    "h4_sto3g": dict(atom="H 0 0 0; H 0 0 0.90; H 0 1.20 0; H 0 1.20 0.90",
                     basis="sto-3g", source="synthetic rectangle 0.90 x 1.20 A"),
    "h2o_sto3g": dict(atom="O 0 0 0.1173; H 0 0.7572 -0.4692; H 0 -0.7572 -0.4692",
                      basis="sto-3g",
                      source="NIST CCCBDB experimental r(OH)=0.9572 A, HOH=104.52 deg"),
    "beh2_ccpvdz": dict(atom="Be 0 0 0; H 0 0 1.3264; H 0 0 -1.3264", basis="cc-pvdz",
                        source="NIST CCCBDB experimental r(BeH)=1.3264 A, linear"),
}

# Full FCI is run for every fixture with at most this many determinants.
FCI_LIMIT = 5_000_000


def reference(mol, mf, ncore=0):
    out = {"e_hf": mf.e_tot}
    m = mp.MP2(mf, frozen=ncore or None).run()
    out["e_mp2_corr"] = m.e_corr
    c = cc.CCSD(mf, frozen=ncore or None).run(conv_tol=1e-10)
    out["e_ccsd"] = c.e_tot
    norb = mol.nao - ncore
    nocc = mol.nelectron // 2 - ncore
    from math import comb
    if comb(norb, nocc) ** 2 <= FCI_LIMIT:
        cas = mcscf.CASCI(mf, norb, 2 * nocc)
        cas.fcisolver.conv_tol = 1e-12
        cas.verbose = 0
        out["e_fci"] = cas.kernel()[0]
    return out


def dump(name, mol, mf, ncore=0):
    """Write the FCIDUMP with the symmetry-unique (8-fold) ERI layout."""
    path = OUT / f"{name}.fcidump"
    if ncore:
        cas = mcscf.CASCI(mf, mol.nao - ncore, mol.nelectron - 2 * ncore)
        h1, ecore = cas.get_h1eff()
        h2 = cas.get_h2eff()
    else:
        mo = mf.mo_coeff
        h1 = mo.T @ mf.get_hcore() @ mo
        h2 = ao2mo.full(mol, mo)
        ecore = mol.energy_nuc()
    norb = h1.shape[0]
    fcidump.from_integrals(str(path), h1, ao2mo.restore(8, h2, norb), norb,
                           mol.nelectron - 2 * ncore, nuc=ecore, ms=0)
    return path.name


def main(dumps_only=False):
    manifest = {"generator": f"pyscf {pyscf.__version__}", "method": "RHF canonical orbitals",
                "units": "hartree", "fixtures": {}}
    for name, mol_def in MOLECULES.items():
        mol = gto.M(atom=mol_def["atom"], basis=mol_def["basis"], verbose=0)
        mf = scf.RHF(mol).run(conv_tol=1e-12)
        variants = [(name, 0)]
        if name == "beh2_ccpvdz":
            variants.append(("beh2_ccpvdz_fc", 1))
        for vname, ncore in variants:
            print("generating", vname, file=sys.stderr)
            if dumps_only:
                dump(vname, mol, mf, ncore)
                continue
            entry = {
                "file": dump(vname, mol, mf, ncore),
                "basis": mol_def["basis"],
                "geometry_angstrom": mol_def["atom"],
                "geometry_source": mol_def["source"],
                "n_frozen_core": ncore,
                "norb": mol.nao - ncore,
                "nelec": mol.nelectron - 2 * ncore,
                "reference": reference(mol, mf, ncore),
            }
            manifest["fixtures"][vname] = entry
            print(json.dumps(entry["reference"]), file=sys.stderr)
    if not dumps_only:
        (OUT / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    # --dumps-only rewrites the FCIDUMPs and keeps the existing manifest
    main(dumps_only="--dumps-only" in sys.argv[1:])
