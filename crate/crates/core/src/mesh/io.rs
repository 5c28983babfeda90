//! Line-oriented mesh text format.
//!
//! ```text
//! nv nt nbe
//! x y              (nv lines, an optional trailing vertex label is ignored)
//! v1 v2 v3 region  (nt lines)
//! v1 v2 label      (nbe lines)
//! ```
//!
//! Indices are 1-based on disk.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::Point2;

use super::{signed_area, Mesh};
use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    /// Next non-empty line, split into tokens.
    fn next_tokens(&mut self) -> Result<Vec<String>> {
        loop {
            self.number += 1;
            match self.inner.next() {
                None => return Err(parse_err(self.number, "unexpected end of file")),
                Some(line) => {
                    let line = line?;
                    let tokens: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
                    if !tokens.is_empty() {
                        return Ok(tokens);
                    }
                }
            }
        }
    }
}

fn parse<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))
}

fn index(tok: &str, line: usize, nv: usize) -> Result<usize> {
    let i: usize = parse(tok, line, "vertex index")?;
    if i == 0 || i > nv {
        return Err(parse_err(line, format!("vertex index {i} out of range 1..={nv}")));
    }
    Ok(i - 1)
}

pub fn read_mesh<R: BufRead>(reader: R) -> Result<Mesh> {
    let mut lines = Lines { inner: reader.lines(), number: 0 };

    let header = lines.next_tokens()?;
    if header.len() != 3 {
        return Err(parse_err(lines.number, "header must be `nv nt nbe`"));
    }
    let nv: usize = parse(&header[0], lines.number, "vertex count")?;
    let nt: usize = parse(&header[1], lines.number, "triangle count")?;
    let nbe: usize = parse(&header[2], lines.number, "boundary edge count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let tok = lines.next_tokens()?;
        if !(2..=3).contains(&tok.len()) {
            return Err(parse_err(lines.number, "vertex line must be `x y`"));
        }
        let x: f64 = parse(&tok[0], lines.number, "coordinate")?;
        let y: f64 = parse(&tok[1], lines.number, "coordinate")?;
        vertices.push(Point2::new(x, y));
    }

    let mut triangles = Vec::with_capacity(nt);
    let mut regions = Vec::with_capacity(nt);
    let mut tri_lines = Vec::with_capacity(nt);
    for _ in 0..nt {
        let tok = lines.next_tokens()?;
        if tok.len() != 4 {
            return Err(parse_err(lines.number, "triangle line must be `v1 v2 v3 region`"));
        }
        let tri = [
            index(&tok[0], lines.number, nv)?,
            index(&tok[1], lines.number, nv)?,
            index(&tok[2], lines.number, nv)?,
        ];
        let area = signed_area(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]);
        if area == 0.0 || !area.is_finite() {
            return Err(parse_err(lines.number, "triangle has zero area"));
        }
        triangles.push(tri);
        regions.push(parse(&tok[3], lines.number, "region")?);
        tri_lines.push(lines.number);
    }

    let mut boundary = Vec::with_capacity(nbe);
    for _ in 0..nbe {
        let tok = lines.next_tokens()?;
        if tok.len() != 3 {
            return Err(parse_err(lines.number, "boundary line must be `v1 v2 label`"));
        }
        let a = index(&tok[0], lines.number, nv)?;
        let b = index(&tok[1], lines.number, nv)?;
        let label: i32 = parse(&tok[2], lines.number, "label")?;
        boundary.push((a, b, label));
    }

    Mesh::from_parts(vertices, triangles, regions, Some(boundary)).map_err(|e| match e {
        Error::InvalidMesh(msg) => {
            // point at the offending triangle when the message names one
            let line = msg
                .strip_prefix("triangle ")
                .and_then(|rest| rest.split_whitespace().next())
                .and_then(|t| t.parse::<usize>().ok())
                .and_then(|t| tri_lines.get(t).copied())
                .unwrap_or(lines.number);
            parse_err(line, msg)
        }
        other => other,
    })
}

pub fn write_mesh<W: Write>(mesh: &Mesh, mut w: W) -> Result<()> {
    writeln!(w, "{} {} {}", mesh.vertex_count(), mesh.triangle_count(), mesh.boundary_edges().len())?;
    for p in mesh.vertices() {
        // `{:?}` prints the shortest representation that round-trips exactly
        writeln!(w, "{:?} {:?}", p.x, p.y)?;
    }
    for (tri, region) in mesh.triangles().iter().zip(mesh.regions()) {
        writeln!(w, "{} {} {} {}", tri[0] + 1, tri[1] + 1, tri[2] + 1, region)?;
    }
    for e in mesh.boundary_edges() {
        writeln!(w, "{} {} {}", e.vertices[0] + 1, e.vertices[1] + 1, e.label)?;
    }
    Ok(())
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let file = std::fs::File::open(path)?;
    read_mesh(std::io::BufReader::new(file))
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_mesh(mesh, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;

    fn roundtrip(mesh: &Mesh) -> Mesh {
        let mut buf = Vec::new();
        write_mesh(mesh, &mut buf).unwrap();
        read_mesh(buf.as_slice()).unwrap()
    }

    #[test]
    fn disk_roundtrip_is_identity() {
        let mesh = build_disk_mesh(100).unwrap();
        assert_eq!(roundtrip(&mesh), mesh);
    }

    #[test]
    fn out_of_range_index_names_line() {
        let text = "3 1 3\n0 0\n1 0\n0 1\n1 2 4 0\n1 2 1\n2 3 1\n3 1 1\n";
        match read_mesh(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn zero_area_triangle_names_line() {
        let text = "3 1 0\n0 0\n1 0\n2 0\n1 2 3 0\n";
        match read_mesh(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_header() {
        assert!(matches!(read_mesh("3 1\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_mesh("3 x 0\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn truncated_file() {
        assert!(matches!(read_mesh("3 1 3\n0 0\n1 0\n".as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn clockwise_triangle_is_reoriented() {
        let text = "3 1 3\n0 0\n1 0\n0 1\n1 3 2 7\n1 2 1\n2 3 1\n3 1 1\n";
        let mesh = read_mesh(text.as_bytes()).unwrap();
        let [a, b, c] = mesh.triangle_points(0);
        assert!(signed_area(&a, &b, &c) > 0.0);
        assert_eq!(mesh.regions(), &[7]);
    }
}
