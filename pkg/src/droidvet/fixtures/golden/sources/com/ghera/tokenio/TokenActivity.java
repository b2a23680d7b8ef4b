package com.ghera.tokenio;

public class TokenActivity extends Activity {
    private String token(String email) throws Exception {
        String key = getString(R.string.encryption_key);
        Cipher c = Cipher.getInstance("AES");
        c.init(Cipher.ENCRYPT_MODE, new SecretKeySpec(
            key.getBytes(), "AES"));
        return Base64.encodeToString(
            c.doFinal(email.getBytes()), Base64.NO_WRAP);
    }
}
