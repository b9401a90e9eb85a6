//! Legacy ASCII VTK output, plus a reader for the subset written here.
//!
//! The DG field is discontinuous, so every (triangle, vertex) incidence
//! gets its own point.

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::dg_space::BrokenField;
use crate::error::{Error, Result};
use crate::estimator::LocalEstimate;
use crate::mesh::Mesh;
use crate::vi_solver::Multiplier;

const VTK_LINE: u8 = 3;
const VTK_TRIANGLE: u8 = 5;

fn header(w: &mut impl Write, title: &str) -> io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")
}

fn scalars(w: &mut impl Write, name: &str, values: &[f64]) -> io::Result<()> {
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(w, "{v:.16e}")?;
    }
    Ok(())
}

/// Triangles with `u_h` as point data and the local estimates as cell data.
pub fn write_solution(w: &mut impl Write, mesh: &Mesh, u: &BrokenField, est: Option<&LocalEstimate>) -> io::Result<()> {
    let ne = mesh.num_elements();
    header(w, "dgfric broken P1 solution")?;
    writeln!(w, "POINTS {} double", 3 * ne)?;
    for k in 0..ne {
        for p in mesh.element_points(k) {
            writeln!(w, "{:.16e} {:.16e} 0", p[0], p[1])?;
        }
    }
    writeln!(w, "CELLS {ne} {}", 4 * ne)?;
    for k in 0..ne {
        writeln!(w, "3 {} {} {}", 3 * k, 3 * k + 1, 3 * k + 2)?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(w, "{VTK_TRIANGLE}")?;
    }
    writeln!(w, "POINT_DATA {}", 3 * ne)?;
    scalars(w, "u", &u.coeffs)?;
    if let Some(est) = est {
        writeln!(w, "CELL_DATA {ne}")?;
        scalars(w, "eta_K", &est.eta_k)?;
        scalars(w, "eta_dK", &est.eta_dk)?;
        scalars(w, "osc_f", &est.osc_f)?;
    }
    Ok(())
}

/// Γ2 faces as line cells carrying the multiplier at the three Gauss
/// points and its oscillation.
pub fn write_multiplier(w: &mut impl Write, mesh: &Mesh, lambda: &Multiplier, osc: Option<&[f64]>) -> io::Result<()> {
    let ff = mesh.friction_faces();
    let n = ff.len();
    header(w, "dgfric friction multiplier")?;
    writeln!(w, "POINTS {} double", 2 * n)?;
    for &e in ff {
        for v in mesh.face(e).vertices {
            let p = mesh.vertices()[v];
            writeln!(w, "{:.16e} {:.16e} 0", p[0], p[1])?;
        }
    }
    writeln!(w, "CELLS {n} {}", 3 * n)?;
    for i in 0..n {
        writeln!(w, "2 {} {}", 2 * i, 2 * i + 1)?;
    }
    writeln!(w, "CELL_TYPES {n}")?;
    for _ in 0..n {
        writeln!(w, "{VTK_LINE}")?;
    }
    writeln!(w, "CELL_DATA {n}")?;
    for q in 0..3 {
        let v: Vec<f64> = (0..n).map(|i| lambda.face_values(i)[q]).collect();
        scalars(w, &format!("lambda_{q}"), &v)?;
    }
    if let Some(osc) = osc {
        scalars(w, "osc_lambda", osc)?;
    }
    Ok(())
}

/// Contents of a legacy ASCII unstructured-grid file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtkData {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub point_data: BTreeMap<String, Vec<f64>>,
    pub cell_data: BTreeMap<String, Vec<f64>>,
}

/// Parses files produced by this module (scalar data only).
pub fn read_vtk(text: &str) -> Result<VtkData> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse { line: 0, msg: format!("unexpected end of file, expected {what}") });
    let err = |line: usize, msg: String| Error::Parse { line, msg };

    let (l, magic) = next("header")?;
    if !magic.starts_with("# vtk DataFile") {
        return Err(err(l, "not a legacy VTK file".into()));
    }
    let mut data = VtkData {
        title: next("title")?.1.to_string(),
        ..Default::default()
    };
    let (l, fmt) = next("ASCII")?;
    if fmt != "ASCII" {
        return Err(err(l, format!("only ASCII files are supported, found `{fmt}`")));
    }
    let (l, ds) = next("DATASET")?;
    if ds != "DATASET UNSTRUCTURED_GRID" {
        return Err(err(l, format!("expected an unstructured grid, found `{ds}`")));
    }

    fn count(l: usize, tok: Option<&str>) -> Result<usize> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse { line: l, msg: "missing or invalid count".into() })
    }
    fn num<T: std::str::FromStr>(l: usize, t: &str) -> Result<T> {
        t.parse().map_err(|_| Error::Parse { line: l, msg: format!("invalid number `{t}`") })
    }

    let mut section: Option<(bool, usize)> = None; // (is point data, size)
    while let Ok((l, line)) = next("section") {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("POINTS") => {
                let n = count(l, tok.next())?;
                for _ in 0..n {
                    let (l, row) = next("point")?;
                    let v: Vec<f64> = row.split_whitespace().map(|t| num(l, t)).collect::<Result<_>>()?;
                    if v.len() != 3 {
                        return Err(err(l, "a point needs three coordinates".into()));
                    }
                    data.points.push([v[0], v[1], v[2]]);
                }
            }
            Some("CELLS") => {
                let n = count(l, tok.next())?;
                for _ in 0..n {
                    let (l, row) = next("cell")?;
                    let v: Vec<usize> = row.split_whitespace().map(|t| num(l, t)).collect::<Result<_>>()?;
                    if v.is_empty() || v[0] + 1 != v.len() {
                        return Err(err(l, "cell size does not match its index list".into()));
                    }
                    data.cells.push(v[1..].to_vec());
                }
            }
            Some("CELL_TYPES") => {
                let n = count(l, tok.next())?;
                for _ in 0..n {
                    let (l, row) = next("cell type")?;
                    data.cell_types.push(num(l, row)?);
                }
            }
            Some("POINT_DATA") => section = Some((true, count(l, tok.next())?)),
            Some("CELL_DATA") => section = Some((false, count(l, tok.next())?)),
            Some("SCALARS") => {
                let name = tok.next().ok_or_else(|| err(l, "SCALARS needs a name".into()))?.to_string();
                let (is_point, n) = section.ok_or_else(|| err(l, "SCALARS outside a data section".into()))?;
                let (l, lt) = next("LOOKUP_TABLE")?;
                if !lt.starts_with("LOOKUP_TABLE") {
                    return Err(err(l, "expected LOOKUP_TABLE".into()));
                }
                let mut values = Vec::with_capacity(n);
                while values.len() < n {
                    let (l, row) = next("value")?;
                    for t in row.split_whitespace() {
                        values.push(num(l, t)?);
                    }
                }
                let target = if is_point { &mut data.point_data } else { &mut data.cell_data };
                target.insert(name, values);
            }
            Some(other) => return Err(err(l, format!("unsupported section `{other}`"))),
            None => {}
        }
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::load_mesh;

    fn square() -> Mesh {
        load_mesh("dgmesh 1\nvertices 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 1 2\n0 2 3\nboundary 4\n0 1 G2\n1 2 G1\n2 3 G1\n3 0 G1\n").unwrap()
    }

    #[test]
    fn two_triangles_give_six_points() {
        let m = square();
        let u = BrokenField::interpolate(&m, |x| x[0] + 2.0 * x[1]);
        let mut buf = Vec::new();
        write_solution(&mut buf, &m, &u, None).unwrap();
        let d = read_vtk(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(d.points.len(), 6);
        assert_eq!(d.cells.len(), 2);
        assert_eq!(d.cell_types, vec![5, 5]);
        // continuous field: equal values at coinciding points
        let vals = &d.point_data["u"];
        for i in 0..6 {
            for j in 0..6 {
                if d.points[i] == d.points[j] {
                    assert_eq!(vals[i], vals[j]);
                }
            }
        }
    }

    #[test]
    fn round_trip_recovers_values() {
        let m = square().refine_uniform();
        let u = BrokenField::from_coeffs(&m, (0..3 * m.num_elements()).map(|i| (i as f64).sqrt() / 7.0).collect());
        let est = LocalEstimate {
            eta_k: (0..m.num_elements()).map(|k| 1.0 / (k as f64 + 3.0)).collect(),
            eta_dk: vec![0.25; m.num_elements()],
            osc_f: vec![1e-17; m.num_elements()],
            osc_lambda: vec![0.0; m.friction_faces().len()],
        };
        let mut buf = Vec::new();
        write_solution(&mut buf, &m, &u, Some(&est)).unwrap();
        let d = read_vtk(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(d.cells.len(), m.num_elements());
        for (a, b) in d.point_data["u"].iter().zip(&u.coeffs) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        for (a, b) in d.cell_data["eta_K"].iter().zip(&est.eta_k) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }

        let lam = Multiplier::sample(&m, 1.0, |x| x[0] - 0.5);
        let mut buf = Vec::new();
        write_multiplier(&mut buf, &m, &lam, Some(&est.osc_lambda)).unwrap();
        let d = read_vtk(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(d.cells.len(), m.friction_faces().len());
        assert_eq!(d.cell_data["lambda_1"][0], lam.face_values(0)[1]);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(read_vtk("hello").is_err());
        assert!(read_vtk("# vtk DataFile Version 3.0\nt\nBINARY\n").is_err());
        assert!(read_vtk("# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 2 double\n0 0 0\n").is_err());
    }
}
