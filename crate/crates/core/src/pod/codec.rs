//! MPOD v1, the chunked time-indexed pod file.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! "MPOD"  u16 version = 1  u16 flags = 0
//! u32 header_len, header_len bytes of UTF-8 JSON        (FileHeader)
//! body:
//!   chunk index   u32 count, count × (u64 start_us, u64 byte_offset)
//!   chunks        per chunk: u32 n, n × 38-byte sample
//!                   (u16 entity_id, u64 t_us, 3×f32 position, 4×f32 wxyz)
//!   annotations   u32 count, per annotation:
//!                   u32 id, u8 kind, u64 t_us, 3×f32 position,
//!                   u16 entity_ref (0xFFFF = none), u16 len + UTF-8 label
//!   transcript    u32 count, per segment:
//!                   u64 start_us, u64 end_us, u32 len + speaker, u32 len + text
//!   mesh          u32 vertex count, 3×f32 each; u32 triangle count, 3×u32 each
//! ```
//!
//! Every offset (section offsets in the header, chunk byte offsets in the
//! index) counts from the first body byte, i.e. the byte after the header
//! JSON. The header records each section's offset, length and CRC32.
//!
//! Chunk `k` holds the samples with `k·D ≤ t < (k+1)·D`, `D` being
//! `chunk_duration_us`, ordered by `(t, entity_id)`. Chunks are emitted for
//! every window from 0 through the last sample, empty ones included, so the
//! index always starts at 0 and has no gaps.
//!
//! Geometry is stored as `f32`; see [`MemoryPod::quantized`].

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    validate, Annotation, AnnotationKind, EntityRole, EntityTrack, EnvironmentMesh, MemoryPod, TrackSample,
    TranscriptSegment, ValidationReport,
};
use crate::geometry::{AnchorFrame, Pose, UnitQuat, Vec3, Zone};
use crate::time::Timestamp;

pub const MAGIC: &[u8; 4] = b"MPOD";
pub const VERSION: u16 = 1;
pub const DEFAULT_CHUNK_DURATION_US: u64 = 5_000_000;
pub const SAMPLE_RECORD_LEN: usize = 38;
pub const NO_ENTITY: u16 = 0xFFFF;

pub const PREAMBLE_LEN: usize = 12;
/// About a year of 5 s chunks; guards against runaway timestamps.
const MAX_CHUNKS: u64 = 1 << 23;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("not an MPOD file")]
    BadMagic,
    #[error("unsupported MPOD version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported MPOD flags {0:#06x}")]
    UnsupportedFlags(u16),
    #[error("truncated {0} section")]
    TruncatedSection(String),
    #[error("checksum mismatch in {0} section")]
    ChecksumMismatch(String),
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("malformed {section} section: {detail}")]
    BadSection { section: String, detail: String },
    #[error("invalid pod:\n{0}")]
    InvalidPod(ValidationReport),
    #[error("{0} does not fit its length field")]
    FieldTooLong(&'static str),
    #[error("entity id 0xFFFF is reserved")]
    ReservedEntityId,
    #[error("chunk duration must be positive")]
    InvalidChunkDuration,
    #[error("chunk index is empty")]
    EmptyIndex,
    #[error("chunk {0} does not exist")]
    NoSuchChunk(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkIndexEntry {
    pub start: Timestamp,
    pub offset: u64,
}

/// Ordinal of the last chunk starting at or before `t`, clamped to the first
/// chunk for earlier times.
pub fn locate_chunk(index: &[ChunkIndexEntry], t: Timestamp) -> Result<usize, CodecError> {
    if index.is_empty() {
        return Err(CodecError::EmptyIndex);
    }
    Ok(index.partition_point(|e| e.start <= t).saturating_sub(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionInfo {
    pub offset: u64,
    pub length: u64,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sections {
    pub chunk_index: SectionInfo,
    pub chunks: SectionInfo,
    pub annotations: SectionInfo,
    pub transcript: SectionInfo,
    pub mesh: SectionInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityEntry {
    pub id: u16,
    pub role: EntityRole,
    pub label: String,
}

/// Declared coordinate conventions. Only the defaults are written or accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinateSystem {
    pub handedness: String,
    pub up: String,
    pub forward: String,
    pub units: String,
}

impl Default for CoordinateSystem {
    fn default() -> Self {
        CoordinateSystem {
            handedness: "right".into(),
            up: "+y".into(),
            forward: "-z".into(),
            units: "m".into(),
        }
    }
}

/// JSON header of an MPOD file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHeader {
    pub pod_id: String,
    pub title: String,
    pub created_at: String,
    pub anchor: AnchorFrame,
    pub coordinates: CoordinateSystem,
    pub chunk_duration_us: u64,
    #[serde(default)]
    pub synthetic_end: bool,
    pub entities: Vec<EntityEntry>,
    pub zones: Vec<Zone>,
    pub sections: Sections,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeOptions {
    pub chunk_duration_us: u64,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions { chunk_duration_us: DEFAULT_CHUNK_DURATION_US }
    }
}

pub fn encode_pod(pod: &MemoryPod) -> Result<Vec<u8>, CodecError> {
    encode_pod_with(pod, &EncodeOptions::default())
}

/// Serializes a valid pod. Output depends only on the pod and options.
pub fn encode_pod_with(pod: &MemoryPod, opts: &EncodeOptions) -> Result<Vec<u8>, CodecError> {
    let report = validate(pod);
    if !report.is_empty() {
        return Err(CodecError::InvalidPod(report));
    }
    encode_unchecked(pod, opts)
}

/// Serializes without validating first, for producing deliberately broken
/// files. Structural limits (field lengths, reserved ids) still apply.
pub fn encode_unchecked(pod: &MemoryPod, opts: &EncodeOptions) -> Result<Vec<u8>, CodecError> {
    if opts.chunk_duration_us == 0 {
        return Err(CodecError::InvalidChunkDuration);
    }
    if pod.tracks.iter().any(|t| t.entity_id == NO_ENTITY) {
        return Err(CodecError::ReservedEntityId);
    }

    let d = opts.chunk_duration_us;
    let mut samples: Vec<(u64, u16, &Pose)> = pod
        .tracks
        .iter()
        .flat_map(|tr| tr.samples.iter().map(move |s| (s.t.as_micros(), tr.entity_id, &s.pose)))
        .collect();
    samples.sort_by_key(|&(t, id, _)| (t, id));
    let chunk_count = samples.last().map_or(1, |&(t, _, _)| t / d + 1);
    if chunk_count > MAX_CHUNKS {
        return Err(CodecError::FieldTooLong("chunk count"));
    }
    let chunk_count_u32 = chunk_count as u32;

    let index_len = 4 + 16 * chunk_count as usize;
    let mut index = Vec::with_capacity(index_len);
    let mut chunks = Vec::with_capacity(samples.len() * SAMPLE_RECORD_LEN + 4 * chunk_count as usize);
    index.extend_from_slice(&chunk_count_u32.to_le_bytes());
    let mut rest = samples.as_slice();
    for k in 0..chunk_count {
        let end = (k + 1).saturating_mul(d);
        let n = rest.partition_point(|&(t, _, _)| t < end);
        let (this, tail) = rest.split_at(n);
        rest = tail;
        index.extend_from_slice(&(k * d).to_le_bytes());
        index.extend_from_slice(&((index_len + chunks.len()) as u64).to_le_bytes());
        chunks.extend_from_slice(&(this.len() as u32).to_le_bytes());
        for &(t, id, pose) in this {
            chunks.extend_from_slice(&id.to_le_bytes());
            chunks.extend_from_slice(&t.to_le_bytes());
            put_vec3(&mut chunks, pose.position);
            for c in pose.orientation.to_array() {
                chunks.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
    }

    let mut annotations = Vec::new();
    annotations.extend_from_slice(&len_u32(pod.annotations.len(), "annotation count")?.to_le_bytes());
    for a in &pod.annotations {
        annotations.extend_from_slice(&a.id.to_le_bytes());
        annotations.push(a.kind.code());
        annotations.extend_from_slice(&a.at.as_micros().to_le_bytes());
        put_vec3(&mut annotations, a.position);
        let entity_ref = match a.entity_ref {
            Some(NO_ENTITY) => return Err(CodecError::ReservedEntityId),
            Some(e) => e,
            None => NO_ENTITY,
        };
        annotations.extend_from_slice(&entity_ref.to_le_bytes());
        let label_len = u16::try_from(a.label.len()).map_err(|_| CodecError::FieldTooLong("annotation label"))?;
        annotations.extend_from_slice(&label_len.to_le_bytes());
        annotations.extend_from_slice(a.label.as_bytes());
    }

    let mut transcript = Vec::new();
    transcript.extend_from_slice(&len_u32(pod.transcript.len(), "transcript count")?.to_le_bytes());
    for s in &pod.transcript {
        transcript.extend_from_slice(&s.start.as_micros().to_le_bytes());
        transcript.extend_from_slice(&s.end.as_micros().to_le_bytes());
        put_str32(&mut transcript, &s.speaker, "speaker")?;
        put_str32(&mut transcript, &s.text, "transcript text")?;
    }

    let mut mesh = Vec::new();
    mesh.extend_from_slice(&len_u32(pod.mesh.vertices.len(), "vertex count")?.to_le_bytes());
    for v in &pod.mesh.vertices {
        put_vec3(&mut mesh, *v);
    }
    mesh.extend_from_slice(&len_u32(pod.mesh.triangles.len(), "triangle count")?.to_le_bytes());
    for tri in &pod.mesh.triangles {
        for i in tri {
            mesh.extend_from_slice(&i.to_le_bytes());
        }
    }

    let mut offset = 0u64;
    let mut info = |bytes: &[u8]| {
        let s = SectionInfo { offset, length: bytes.len() as u64, crc32: crc32fast::hash(bytes) };
        offset += bytes.len() as u64;
        s
    };
    let sections = Sections {
        chunk_index: info(&index),
        chunks: info(&chunks),
        annotations: info(&annotations),
        transcript: info(&transcript),
        mesh: info(&mesh),
    };
    let header = FileHeader {
        pod_id: pod.pod_id.clone(),
        title: pod.title.clone(),
        created_at: pod.created_at.clone(),
        anchor: pod.anchor,
        coordinates: CoordinateSystem::default(),
        chunk_duration_us: d,
        synthetic_end: pod.synthetic_end,
        entities: pod
            .tracks
            .iter()
            .map(|t| EntityEntry { id: t.entity_id, role: t.role, label: t.label.clone() })
            .collect(),
        zones: pod.zones.clone(),
        sections,
    };
    let header_json = serde_json::to_vec(&header).map_err(|e| CodecError::BadHeader(e.to_string()))?;
    let header_len = len_u32(header_json.len(), "header")?;

    let mut out = Vec::with_capacity(PREAMBLE_LEN + header_json.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&header_json);
    for section in [&index, &chunks, &annotations, &transcript, &mesh] {
        out.extend_from_slice(section);
    }
    Ok(out)
}

fn len_u32(n: usize, what: &'static str) -> Result<u32, CodecError> {
    u32::try_from(n).map_err(|_| CodecError::FieldTooLong(what))
}

fn put_vec3(out: &mut Vec<u8>, v: Vec3) {
    for c in v.to_array() {
        out.extend_from_slice(&(c as f32).to_le_bytes());
    }
}

fn put_str32(out: &mut Vec<u8>, s: &str, what: &'static str) -> Result<(), CodecError> {
    out.extend_from_slice(&len_u32(s.len(), what)?.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

/// Decodes and validates.
pub fn decode_pod(bytes: &[u8]) -> Result<MemoryPod, CodecError> {
    let pod = decode_pod_lenient(bytes)?;
    let report = validate(&pod);
    if !report.is_empty() {
        return Err(CodecError::InvalidPod(report));
    }
    Ok(pod)
}

/// Decodes without validating the result, for inspecting partial captures.
/// Framing, checksums and section structure are still checked.
pub fn decode_pod_lenient(bytes: &[u8]) -> Result<MemoryPod, CodecError> {
    PodReader::open(bytes)?.read_pod()
}

/// One decoded chunk record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChunkSample {
    pub entity_id: u16,
    pub t: Timestamp,
    pub pose: Pose,
}

/// Random access to an MPOD byte buffer: framing and checksums are verified
/// on open, sections are parsed on demand.
#[derive(Debug, Clone)]
pub struct PodReader<'a> {
    header: FileHeader,
    index: Vec<ChunkIndexEntry>,
    body: &'a [u8],
}

impl<'a> PodReader<'a> {
    pub fn open(bytes: &'a [u8]) -> Result<Self, CodecError> {
        let n = bytes.len().min(4);
        if bytes[..n] != MAGIC[..n] || n == 0 {
            return Err(CodecError::BadMagic);
        }
        if bytes.len() < PREAMBLE_LEN {
            return Err(CodecError::TruncatedSection("preamble".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(CodecError::UnsupportedVersion(version));
        }
        let flags = u16::from_le_bytes([bytes[6], bytes[7]]);
        if flags != 0 {
            return Err(CodecError::UnsupportedFlags(flags));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body_start = PREAMBLE_LEN
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| CodecError::TruncatedSection("header".into()))?;
        let header: FileHeader = serde_json::from_slice(&bytes[PREAMBLE_LEN..body_start])
            .map_err(|e| CodecError::BadHeader(e.to_string()))?;
        if header.coordinates != CoordinateSystem::default() {
            return Err(CodecError::BadHeader(format!("unsupported coordinate system {:?}", header.coordinates)));
        }
        if header.chunk_duration_us == 0 {
            return Err(CodecError::BadHeader("chunk_duration_us is zero".into()));
        }
        let body = &bytes[body_start..];
        let s = &header.sections;
        for (name, info) in [
            ("chunk_index", &s.chunk_index),
            ("chunks", &s.chunks),
            ("annotations", &s.annotations),
            ("transcript", &s.transcript),
            ("mesh", &s.mesh),
        ] {
            let data = section_slice(body, info).ok_or_else(|| CodecError::TruncatedSection(name.into()))?;
            if crc32fast::hash(data) != info.crc32 {
                return Err(CodecError::ChecksumMismatch(name.into()));
            }
        }

        let mut r = ByteReader::new(section_slice(body, &s.chunk_index).unwrap(), "chunk_index");
        let count = r.u32()? as usize;
        let mut index = Vec::with_capacity(count.min(r.remaining() / 16));
        for _ in 0..count {
            let start = Timestamp(r.u64()?);
            let offset = r.u64()?;
            index.push(ChunkIndexEntry { start, offset });
        }
        r.finish()?;
        if index.first().is_some_and(|e| e.start != Timestamp::ZERO)
            || index.windows(2).any(|w| w[1].start <= w[0].start)
        {
            return Err(bad("chunk_index", "chunk start times must begin at 0 and increase"));
        }
        let chunks = &s.chunks;
        for e in &index {
            if e.offset < chunks.offset || e.offset >= chunks.offset + chunks.length {
                return Err(bad("chunk_index", format!("offset {} outside chunks section", e.offset)));
            }
        }

        Ok(PodReader { header, index, body })
    }

    pub fn header(&self) -> &FileHeader {
        &self.header
    }

    pub fn chunk_index(&self) -> &[ChunkIndexEntry] {
        &self.index
    }

    pub fn chunk_count(&self) -> usize {
        self.index.len()
    }

    pub fn read_chunk(&self, ordinal: usize) -> Result<Vec<ChunkSample>, CodecError> {
        let entry = self.index.get(ordinal).ok_or(CodecError::NoSuchChunk(ordinal))?;
        let s = &self.header.sections.chunks;
        let end = (s.offset + s.length) as usize;
        let mut r = ByteReader::new(&self.body[entry.offset as usize..end], "chunks");
        let n = r.u32()? as usize;
        let mut out = Vec::with_capacity(n.min(r.remaining() / SAMPLE_RECORD_LEN));
        for _ in 0..n {
            let entity_id = r.u16()?;
            let t = Timestamp(r.u64()?);
            let position = r.vec3()?;
            let [w, x, y, z] = [r.f32()?, r.f32()?, r.f32()?, r.f32()?];
            out.push(ChunkSample {
                entity_id,
                t,
                pose: Pose::new(position, UnitQuat::from_wxyz_unchecked(w as f64, x as f64, y as f64, z as f64)),
            });
        }
        Ok(out)
    }

    /// Samples stored in the chunk that covers `t`.
    pub fn samples_near(&self, t: Timestamp) -> Result<Vec<ChunkSample>, CodecError> {
        self.read_chunk(locate_chunk(&self.index, t)?)
    }

    pub fn read_annotations(&self) -> Result<Vec<Annotation>, CodecError> {
        let mut r = ByteReader::new(self.section(&self.header.sections.annotations), "annotations");
        let count = r.u32()? as usize;
        let mut out = Vec::with_capacity(count.min(r.remaining()));
        for _ in 0..count {
            let id = r.u32()?;
            let code = r.u8()?;
            let kind = AnnotationKind::from_code(code)
                .ok_or_else(|| bad("annotations", format!("unknown kind {code}")))?;
            let at = Timestamp(r.u64()?);
            let position = r.vec3()?;
            let entity_ref = Some(r.u16()?).filter(|&e| e != NO_ENTITY);
            let len = r.u16()? as usize;
            let label = r.string(len)?;
            out.push(Annotation { id, kind, label, at, position, entity_ref });
        }
        r.finish()?;
        Ok(out)
    }

    pub fn read_transcript(&self) -> Result<Vec<TranscriptSegment>, CodecError> {
        let mut r = ByteReader::new(self.section(&self.header.sections.transcript), "transcript");
        let count = r.u32()? as usize;
        let mut out = Vec::with_capacity(count.min(r.remaining()));
        for _ in 0..count {
            let start = Timestamp(r.u64()?);
            let end = Timestamp(r.u64()?);
            let len = r.u32()? as usize;
            let speaker = r.string(len)?;
            let len = r.u32()? as usize;
            let text = r.string(len)?;
            out.push(TranscriptSegment { start, end, speaker, text });
        }
        r.finish()?;
        Ok(out)
    }

    pub fn read_mesh(&self) -> Result<EnvironmentMesh, CodecError> {
        let mut r = ByteReader::new(self.section(&self.header.sections.mesh), "mesh");
        let nv = r.u32()? as usize;
        let mut vertices = Vec::with_capacity(nv.min(r.remaining() / 12));
        for _ in 0..nv {
            vertices.push(r.vec3()?);
        }
        let nt = r.u32()? as usize;
        let mut triangles = Vec::with_capacity(nt.min(r.remaining() / 12));
        for _ in 0..nt {
            triangles.push([r.u32()?, r.u32()?, r.u32()?]);
        }
        r.finish()?;
        Ok(EnvironmentMesh { vertices, triangles })
    }

    pub fn read_pod(&self) -> Result<MemoryPod, CodecError> {
        let h = &self.header;
        let mut tracks: Vec<EntityTrack> =
            h.entities.iter().map(|e| EntityTrack::new(e.id, e.role, e.label.clone())).collect();
        let slot: HashMap<u16, usize> = h.entities.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
        if slot.len() != h.entities.len() {
            return Err(CodecError::BadHeader("duplicate entity id".into()));
        }
        for (k, entry) in self.index.iter().enumerate() {
            let chunk_end = self.index.get(k + 1).map(|e| e.start);
            for s in self.read_chunk(k)? {
                if s.t < entry.start || chunk_end.is_some_and(|end| s.t >= end) {
                    return Err(bad("chunks", format!("sample at {} outside chunk {k}", s.t)));
                }
                let i = *slot
                    .get(&s.entity_id)
                    .ok_or_else(|| bad("chunks", format!("unknown entity {}", s.entity_id)))?;
                tracks[i].samples.push(TrackSample { t: s.t, pose: s.pose });
            }
        }
        Ok(MemoryPod {
            pod_id: h.pod_id.clone(),
            title: h.title.clone(),
            created_at: h.created_at.clone(),
            anchor: h.anchor,
            tracks,
            annotations: self.read_annotations()?,
            transcript: self.read_transcript()?,
            mesh: self.read_mesh()?,
            zones: h.zones.clone(),
            synthetic_end: h.synthetic_end,
        })
    }

    fn section(&self, info: &SectionInfo) -> &'a [u8] {
        // bounds were checked in `open`
        section_slice(self.body, info).unwrap()
    }
}

fn section_slice<'b>(body: &'b [u8], info: &SectionInfo) -> Option<&'b [u8]> {
    let start = usize::try_from(info.offset).ok()?;
    let end = start.checked_add(usize::try_from(info.length).ok()?)?;
    body.get(start..end)
}

fn bad(section: &str, detail: impl Into<String>) -> CodecError {
    CodecError::BadSection { section: section.into(), detail: detail.into() }
}

struct ByteReader<'b> {
    data: &'b [u8],
    pos: usize,
    section: &'static str,
}

impl<'b> ByteReader<'b> {
    fn new(data: &'b [u8], section: &'static str) -> Self {
        ByteReader { data, pos: 0, section }
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'b [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::TruncatedSection(self.section.into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, CodecError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn vec3(&mut self) -> Result<Vec3, CodecError> {
        Ok(Vec3::new(self.f32()? as f64, self.f32()? as f64, self.f32()? as f64))
    }

    fn string(&mut self, len: usize) -> Result<String, CodecError> {
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| bad(self.section, "invalid UTF-8"))
    }

    fn finish(self) -> Result<(), CodecError> {
        if self.remaining() != 0 {
            return Err(bad(self.section, format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}
