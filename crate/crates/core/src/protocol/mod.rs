//! The three-party search protocol, simulated in-process.
//!
//! A [`User`] owns the plaintext codes and the first Montgomery layer, a
//! [`DataOwner`] holds the second layer and brokers server registration, and a
//! [`Server`] stores nested-signature hash tables and answers blinded queries.
//! Parties talk only through the serializable message types in [`messages`].
//!
//! ```
//! use mimp::code::BitCode;
//! use mimp::protocol::{build_index, DataOwner, Server, SystemParams, User};
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha8Rng;
//!
//! let mut rng = ChaCha8Rng::seed_from_u64(1);
//! let params = SystemParams::new(120, 10, 2, 15, 15)?;
//! let mut user = User::new(params, &mut rng)?;
//! let mut owner = DataOwner::new(params);
//! let mut server = Server::new(params, &mut rng)?;
//!
//! let record = BitCode::random(120, &mut rng);
//! let id = owner.receive_enrolment(user.enroll(&record, &mut rng)?)?;
//! let (for_user, for_server) = owner.register_server(&server.registration_request(), &mut rng)?;
//! user.install_query_keys(for_user)?;
//! server.install_keys(for_server)?;
//! build_index(&owner, &mut server)?;
//!
//! let result = server.search(&user.query(&record, server.id())?)?;
//! assert_eq!(result.candidates[0].id, id);
//! assert_eq!(result.candidates[0].m, 10);
//! # Ok::<(), mimp::error::Error>(())
//! ```

mod index;
pub mod messages;
mod params;
mod party;
mod retrieval;

pub use index::{bucket_key, key_width, load_index, read_index, save_index, write_index, IndexMeta, SearchIndex};
pub use params::SystemParams;
pub use party::{audit, build_index, query, DataOwner, Material, Party, Role, Server, User};
pub use retrieval::{knn, rank_ordered_search, Candidate, RetrievalResult};

/// Leading bytes of every saved index file.
pub const INDEX_MAGIC: &[u8; 8] = b"MIMPIDX1";
