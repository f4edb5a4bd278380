//! Mesh file IO: Wavefront OBJ (ASCII) and PLY (ASCII or binary
//! little-endian), the two formats every downstream viewer accepts.
//!
//! PLY stores float32 coordinates, so round-tripping is exact to single
//! precision; OBJ is written with nine decimals. Faces with more than three
//! vertices are fan-triangulated on read.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::mesh::TriangleMesh;
use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    PlyAscii,
    PlyBinary,
}

impl MeshFormat {
    /// Format implied by a file extension (`.obj` or `.ply`); PLY defaults
    /// to binary for writing, and reading auto-detects from the header.
    pub fn from_path(path: &Path) -> Result<MeshFormat> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::PlyBinary),
            other => Err(Error::InvalidConfig(format!(
                "unsupported mesh extension {other:?} for {}",
                path.display()
            ))),
        }
    }
}

pub fn mesh_read(path: &Path) -> Result<TriangleMesh> {
    match MeshFormat::from_path(path)? {
        MeshFormat::Obj => read_obj(path),
        _ => read_ply(path),
    }
}

pub fn mesh_write(path: &Path, mesh: &TriangleMesh, format: MeshFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        MeshFormat::Obj => write_obj(&mut w, mesh),
        MeshFormat::PlyAscii => write_ply_ascii(&mut w, mesh),
        MeshFormat::PlyBinary => write_ply_binary(&mut w, mesh),
    }
    .map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in &mut coords {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| parse_err(path, line_no, "vertex needs 3 coordinates"))?;
                    *c = tok.parse().map_err(|_| {
                        parse_err(path, line_no, format!("bad coordinate {tok:?}"))
                    })?;
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut indices = Vec::new();
                for tok in tokens {
                    // "i", "i/t", "i/t/n", "i//n" all start with the vertex index.
                    let first = tok.split('/').next().unwrap_or("");
                    let idx: i64 = first.parse().map_err(|_| {
                        parse_err(path, line_no, format!("bad face index {tok:?}"))
                    })?;
                    if idx < 1 {
                        return Err(parse_err(
                            path,
                            line_no,
                            format!("face index {idx} out of range (1-based required)"),
                        ));
                    }
                    let idx = idx as usize - 1;
                    if idx >= vertices.len() {
                        return Err(parse_err(
                            path,
                            line_no,
                            format!("face references vertex {} of {}", idx + 1, vertices.len()),
                        ));
                    }
                    indices.push(idx);
                }
                if indices.len() < 3 {
                    return Err(parse_err(path, line_no, "face needs at least 3 vertices"));
                }
                for k in 1..indices.len() - 1 {
                    triangles.push([indices[0], indices[k], indices[k + 1]]);
                }
            }
            _ => {} // comments, normals, texcoords, groups
        }
    }
    TriangleMesh::new(vertices, triangles)
}

fn write_obj<W: Write>(w: &mut W, mesh: &TriangleMesh) -> std::io::Result<()> {
    for v in &mesh.vertices {
        writeln!(w, "v {:.9} {:.9} {:.9}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

fn write_ply_header<W: Write>(w: &mut W, mesh: &TriangleMesh, format: &str) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format {format} 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertices.len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(w, "element face {}", mesh.triangles.len())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")
}

fn write_ply_ascii<W: Write>(w: &mut W, mesh: &TriangleMesh) -> std::io::Result<()> {
    write_ply_header(w, mesh, "ascii")?;
    for v in &mesh.vertices {
        let (x, y, z) = (v.x as f32, v.y as f32, v.z as f32);
        writeln!(w, "{x} {y} {z}")?;
    }
    for t in &mesh.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

fn write_ply_binary<W: Write>(w: &mut W, mesh: &TriangleMesh) -> std::io::Result<()> {
    write_ply_header(w, mesh, "binary_little_endian")?;
    for v in &mesh.vertices {
        for c in [v.x as f32, v.y as f32, v.z as f32] {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    for t in &mesh.triangles {
        w.write_all(&[3u8])?;
        for &i in t {
            w.write_all(&(i as i32).to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_ply(path: &Path) -> Result<TriangleMesh> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    // --- header ---
    let mut line = String::new();
    let mut line_no = 0;
    let mut read_line = |reader: &mut BufReader<File>, line: &mut String| -> Result<usize> {
        line.clear();
        line_no += 1;
        reader
            .read_line(line)
            .map_err(|e| Error::io(path, e))
            .map(|n| {
                let _ = n;
                line_no
            })
    };

    read_line(&mut reader, &mut line)?;
    if line.trim_end() != "ply" {
        return Err(parse_err(path, 1, "missing `ply` magic"));
    }

    let mut binary = false;
    let mut vertex_count: Option<usize> = None;
    let mut face_count: Option<usize> = None;
    let mut current_element = String::new();
    let mut vertex_props: Vec<String> = Vec::new();

    loop {
        let n = read_line(&mut reader, &mut line)?;
        let trimmed = line.trim_end();
        if trimmed.is_empty() && line.is_empty() {
            return Err(parse_err(path, n, "unexpected end of header"));
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", _] => binary = false,
            ["format", "binary_little_endian", _] => binary = true,
            ["format", other, _] => {
                return Err(parse_err(path, n, format!("unsupported format {other}")))
            }
            ["comment", ..] => {}
            ["element", "vertex", count] => {
                current_element = "vertex".into();
                vertex_count = Some(
                    count
                        .parse()
                        .map_err(|_| parse_err(path, n, "bad vertex count"))?,
                );
            }
            ["element", "face", count] => {
                current_element = "face".into();
                face_count = Some(
                    count
                        .parse()
                        .map_err(|_| parse_err(path, n, "bad face count"))?,
                );
            }
            ["element", ..] => current_element = "other".into(),
            ["property", rest @ ..] if current_element == "vertex" => {
                if rest.len() == 2 && rest[0] == "float" {
                    vertex_props.push(rest[1].to_string());
                } else {
                    return Err(parse_err(
                        path,
                        n,
                        format!("unsupported vertex property `{}`", trimmed),
                    ));
                }
            }
            ["property", ..] => {}
            ["end_header"] => break,
            _ => return Err(parse_err(path, n, format!("unrecognized header line `{trimmed}`"))),
        }
    }

    let vertex_count =
        vertex_count.ok_or_else(|| parse_err(path, 0, "header missing vertex element"))?;
    let face_count =
        face_count.ok_or_else(|| parse_err(path, 0, "header missing face element"))?;
    for axis in ["x", "y", "z"] {
        if !vertex_props.iter().any(|p| p == axis) {
            return Err(parse_err(path, 0, format!("vertex element missing `{axis}`")));
        }
    }
    let coord_index = |axis: &str| vertex_props.iter().position(|p| p == axis).unwrap();
    let (ix, iy, iz) = (coord_index("x"), coord_index("y"), coord_index("z"));

    let mut vertices = Vec::with_capacity(vertex_count);
    let mut triangles = Vec::with_capacity(face_count);

    if binary {
        let mut buf = vec![0u8; 4 * vertex_props.len()];
        for _ in 0..vertex_count {
            reader
                .read_exact(&mut buf)
                .map_err(|e| Error::io(path, e))?;
            let coord = |k: usize| {
                f32::from_le_bytes([buf[4 * k], buf[4 * k + 1], buf[4 * k + 2], buf[4 * k + 3]])
                    as f64
            };
            vertices.push(Vec3::new(coord(ix), coord(iy), coord(iz)));
        }
        for f in 0..face_count {
            let mut count = [0u8; 1];
            reader
                .read_exact(&mut count)
                .map_err(|e| Error::io(path, e))?;
            let k = count[0] as usize;
            if k < 3 {
                return Err(parse_err(path, 0, format!("face {f} has {k} vertices")));
            }
            let mut idx = vec![0usize; k];
            let mut b = [0u8; 4];
            for slot in &mut idx {
                reader.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
                let v = i32::from_le_bytes(b);
                if v < 0 || v as usize >= vertex_count {
                    return Err(parse_err(path, 0, format!("face index {v} out of range")));
                }
                *slot = v as usize;
            }
            for k in 1..idx.len() - 1 {
                triangles.push([idx[0], idx[k], idx[k + 1]]);
            }
        }
    } else {
        for _ in 0..vertex_count {
            let n = read_line(&mut reader, &mut line)?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(path, n, "bad vertex row"))?;
            if vals.len() != vertex_props.len() {
                return Err(parse_err(path, n, "vertex row arity mismatch"));
            }
            vertices.push(Vec3::new(vals[ix], vals[iy], vals[iz]));
        }
        for _ in 0..face_count {
            let n = read_line(&mut reader, &mut line)?;
            let vals: Vec<i64> = line
                .split_whitespace()
                .map(|t| t.parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(path, n, "bad face row"))?;
            let (&count, idx) = vals
                .split_first()
                .ok_or_else(|| parse_err(path, n, "empty face row"))?;
            if count < 3 || idx.len() != count as usize {
                return Err(parse_err(path, n, "face row arity mismatch"));
            }
            let mut indices = Vec::with_capacity(idx.len());
            for &v in idx {
                if v < 0 || v as usize >= vertex_count {
                    return Err(parse_err(path, n, format!("face index {v} out of range")));
                }
                indices.push(v as usize);
            }
            for k in 1..indices.len() - 1 {
                triangles.push([indices[0], indices[k], indices[k + 1]]);
            }
        }
    }

    TriangleMesh::new(vertices, triangles)
}
