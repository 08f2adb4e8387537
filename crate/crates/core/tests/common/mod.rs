//! Planted scanner corpus shared by the scan tests and the acceptance run.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use base64::Engine as _;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn write(root: &Path, rel: &str, body: &str) {
    let p = root.join(rel);
    fs::create_dir_all(p.parent().unwrap()).unwrap();
    fs::write(p, body).unwrap();
}

/// Throwaway armored blob; the content is random bytes, not a usable key.
pub fn fake_pem(label: &str, seed: u64) -> String {
    let mut bytes = vec![0u8; 600];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut bytes);
    let b64 = base64::engine::general_purpose::STANDARD.encode(bytes);
    let body: Vec<&str> = b64
        .as_bytes()
        .chunks(64)
        .map(|c| std::str::from_utf8(c).unwrap())
        .collect();
    format!("-----BEGIN {label}-----\n{}\n-----END {label}-----\n", body.join("\n"))
}

/// Plants the corpus under `root` and returns (relative path, line, rule id)
/// for every expected finding.
pub fn plant(root: &Path) -> BTreeSet<(String, usize, String)> {
    write(root, "keys/server.key", &fake_pem("RSA PRIVATE KEY", 1));
    write(
        root,
        "keys/device.pem",
        &format!("# device key\n{}", fake_pem("EC PRIVATE KEY", 2)),
    );
    write(root, "deploy/id_ops", &fake_pem("OPENSSH PRIVATE KEY", 3));
    write(
        root,
        "svc/src/main/java/Crypto.java",
        "class Crypto {\n  void a() throws Exception {\n    KeyPairGenerator.getInstance(\"RSA\");\n    MessageDigest.getInstance(\"MD5\");\n    Cipher.getInstance(\"DESede/CBC/PKCS5Padding\");\n  }\n}\n",
    );
    write(
        root,
        "tools/hash.py",
        "import hashlib\n\ndef f(b):\n    return hashlib.sha1(b).hexdigest()\n",
    );
    write(
        root,
        "signer/sign.go",
        "package signer\n\nfunc k() {\n\tpriv, _ := rsa.GenerateKey(rand.Reader, 2048)\n\t_ = priv\n}\n",
    );
    write(
        root,
        "etc/nginx/site.conf",
        "server {\n    ssl_protocols TLSv1 TLSv1.2;\n    ssl_ciphers ECDHE-RSA-AES128-GCM-SHA256;\n}\n",
    );
    write(root, "etc/app.yaml", "tls:\n  key_size: 1024\n  digest: md5\n");
    write(root, "web/hash.js", "const h = crypto.createHash('md5');\n");
    [
        ("keys/server.key", 1, "PEM-RSA-PRIVATE-KEY"),
        ("keys/device.pem", 2, "PEM-EC-PRIVATE-KEY"),
        ("deploy/id_ops", 1, "PEM-OPENSSH-PRIVATE-KEY"),
        ("svc/src/main/java/Crypto.java", 3, "JAVA-KEYPAIRGEN-RSA"),
        ("svc/src/main/java/Crypto.java", 4, "JAVA-DIGEST-MD5"),
        ("svc/src/main/java/Crypto.java", 5, "JAVA-CIPHER-DESEDE"),
        ("tools/hash.py", 4, "PY-HASHLIB-SHA1"),
        ("signer/sign.go", 4, "GO-RSA-GENERATE"),
        ("etc/nginx/site.conf", 2, "CONF-LEGACY-TLS-PROTOCOL"),
        ("etc/nginx/site.conf", 3, "CONF-SSL-CIPHERS-RSA"),
        ("etc/app.yaml", 2, "CONF-RSA-KEY-SIZE"),
        ("etc/app.yaml", 3, "CONF-DIGEST-MD5"),
        ("web/hash.js", 1, "NODE-HASH-MD5"),
    ]
    .into_iter()
    .map(|(p, l, r)| (p.to_owned(), l, r.to_owned()))
    .collect()
}
