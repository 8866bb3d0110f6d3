/*
 * Copyright (C) 2026 The androsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Android Security Framework permission model: manifests, install-time
// grants, intent delivery, API permission checks and per-URI grants.

#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "androsim/core_model.hpp"

namespace androsim {

class PermissionId {
  public:
    PermissionId() = delete;
    explicit PermissionId(std::string name) : name_(std::move(name)) {
        if (name_.empty()) throw Error(ErrorCode::InvalidArgument, "empty permission name");
    }
    const std::string& name() const { return name_; }
    auto operator<=>(const PermissionId&) const = default;
    bool operator==(const PermissionId&) const = default;

  private:
    std::string name_;
};

using PermissionSet = std::set<PermissionId>;

namespace permissions {
inline const PermissionId kInternet{"android.permission.INTERNET"};
inline const PermissionId kSendSms{"android.permission.SEND_SMS"};
inline const PermissionId kReceiveSms{"android.permission.RECEIVE_SMS"};
inline const PermissionId kAccessFineLocation{"android.permission.ACCESS_FINE_LOCATION"};
inline const PermissionId kAccessCoarseLocation{"android.permission.ACCESS_COARSE_LOCATION"};
inline const PermissionId kReadContacts{"android.permission.READ_CONTACTS"};
inline const PermissionId kCamera{"android.permission.CAMERA"};
inline const PermissionId kCallPhone{"android.permission.CALL_PHONE"};

inline PermissionSet registered() {
    return {kInternet,       kSendSms,     kReceiveSms, kAccessFineLocation,
            kAccessCoarseLocation, kReadContacts, kCamera,     kCallPhone};
}
}  // namespace permissions

// Short names ("SEND_SMS") are shown in deny reasons.
inline std::string short_name(const PermissionId& p) {
    const auto& n = p.name();
    const auto dot = n.rfind('.');
    return dot == std::string::npos ? n : n.substr(dot + 1);
}

struct Manifest {
    std::string app_name;
    PermissionSet declared;
    PermissionSet requested;

    bool operator==(const Manifest&) const = default;
};

// Deny reason codes.
namespace deny_reason {
inline constexpr std::string_view kMissingPermissionPrefix = "missing-permission:";
inline constexpr std::string_view kSecurityException = "security-exception";
inline constexpr std::string_view kNoUriGrant = "no-uri-grant";
}  // namespace deny_reason

// An installed application. The manifest, and with it the granted
// permission set, is fixed at install time.
class AppRecord {
  public:
    const Manifest& manifest() const { return manifest_; }
    const std::string& name() const { return manifest_.app_name; }
    const Credential& cred() const { return cred_; }
    const PermissionSet& granted() const { return manifest_.requested; }
    const std::set<ComponentRef>& components() const { return components_; }

    bool operator==(const AppRecord&) const = default;

  private:
    friend class PackageManager;
    AppRecord(Manifest manifest, Credential cred, std::set<ComponentRef> components)
        : manifest_(std::move(manifest)), cred_(std::move(cred)), components_(std::move(components)) {}

    Manifest manifest_;
    Credential cred_;
    std::set<ComponentRef> components_;
};

// Installs applications and allocates their sandbox uids.
class PackageManager {
  public:
    const AppRecord& install_app(const Manifest& manifest, bool user_accepts) {
        if (manifest.app_name.empty()) throw Error(ErrorCode::InvalidArgument, "empty app name");
        if (apps_.count(manifest.app_name) != 0) {
            throw Error(ErrorCode::DuplicateApp, manifest.app_name);
        }
        if (!user_accepts) {
            throw Error(ErrorCode::InstallAborted,
                        "user refused the permissions requested by " + manifest.app_name);
        }
        const Uid uid = next_uid_++;
        AppRecord record(manifest, app_credential(uid),
                         {ComponentRef{manifest.app_name, Layer::A}});
        return apps_.emplace(manifest.app_name, std::move(record)).first->second;
    }

    const AppRecord* find(const std::string& app_name) const {
        auto it = apps_.find(app_name);
        return it == apps_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return apps_.size(); }

  private:
    std::map<std::string, AppRecord> apps_;
    Uid next_uid_ = kFirstAppUid;
};

inline PolicyDecision check_intent_delivery(const AppRecord& sender,
                                            const PermissionSet& receiver_required) {
    for (const auto& p : receiver_required) {
        if (sender.granted().count(p) == 0) {
            return PolicyDecision::deny(std::string(deny_reason::kMissingPermissionPrefix) +
                                        short_name(p));
        }
    }
    return PolicyDecision::allow();
}

struct IntentRecipient {
    ComponentRef component;
    PermissionSet required;
};

// Decides each recipient independently.
inline std::vector<std::pair<ComponentRef, PolicyDecision>> deliver_intent(
    const AppRecord& sender, const std::vector<IntentRecipient>& recipients) {
    std::vector<std::pair<ComponentRef, PolicyDecision>> out;
    out.reserve(recipients.size());
    for (const auto& r : recipients) {
        out.emplace_back(r.component, check_intent_delivery(sender, r.required));
    }
    return out;
}

inline PolicyDecision check_api_permission(const AppRecord& caller,
                                           const PermissionId& api_required) {
    if (caller.granted().count(api_required) != 0) return PolicyDecision::allow();
    return PolicyDecision::deny(std::string(deny_reason::kSecurityException));
}

// ---------------------------------------------------------------------------
// Per-URI grants

enum class UriMode : std::uint8_t { Read = 1, Write = 2, ReadWrite = 3 };

inline constexpr bool satisfies(UriMode held, UriMode wanted) {
    return (static_cast<unsigned>(held) & static_cast<unsigned>(wanted)) ==
           static_cast<unsigned>(wanted);
}

inline constexpr UriMode join(UriMode a, UriMode b) {
    return static_cast<UriMode>(static_cast<unsigned>(a) | static_cast<unsigned>(b));
}

class UriGrantTable {
  public:
    using Key = std::pair<std::string, std::string>;  // (grantee, uri)

    const std::map<Key, UriMode>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    bool operator==(const UriGrantTable&) const = default;

  private:
    friend UriGrantTable grant_uri(UriGrantTable, const std::string&, const std::string&, UriMode);
    friend UriGrantTable revoke_uri(UriGrantTable, const std::string&, const std::string&);
    std::map<Key, UriMode> entries_;
};

// Inserts a grant, or widens an existing one.
inline UriGrantTable grant_uri(UriGrantTable table, const std::string& grantee,
                               const std::string& uri, UriMode mode) {
    auto [it, inserted] = table.entries_.try_emplace({grantee, uri}, mode);
    if (!inserted) it->second = join(it->second, mode);
    return table;
}

inline UriGrantTable revoke_uri(UriGrantTable table, const std::string& grantee,
                                const std::string& uri) {
    table.entries_.erase({grantee, uri});
    return table;
}

inline PolicyDecision check_uri(const UriGrantTable& table, const std::string& grantee,
                                const std::string& uri, UriMode mode) {
    auto it = table.entries().find({grantee, uri});
    if (it != table.entries().end() && satisfies(it->second, mode)) return PolicyDecision::allow();
    return PolicyDecision::deny(std::string(deny_reason::kNoUriGrant));
}

// ---------------------------------------------------------------------------
// JSON: {"app": text, "declared": [text], "requested": [text]}

inline PermissionSet permission_set_from_json(const nlohmann::json& j) {
    PermissionSet out;
    for (const auto& item : j) out.insert(PermissionId(item.get<std::string>()));
    return out;
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
    Manifest m;
    m.app_name = j.at("app").get<std::string>();
    if (m.app_name.empty()) throw Error(ErrorCode::InvalidArgument, "manifest app name is empty");
    m.declared = permission_set_from_json(j.value("declared", nlohmann::json::array()));
    m.requested = permission_set_from_json(j.value("requested", nlohmann::json::array()));
    return m;
}

inline nlohmann::json manifest_to_json(const Manifest& m) {
    nlohmann::json declared = nlohmann::json::array();
    nlohmann::json requested = nlohmann::json::array();
    for (const auto& p : m.declared) declared.push_back(p.name());
    for (const auto& p : m.requested) requested.push_back(p.name());
    return {{"app", m.app_name}, {"declared", declared}, {"requested", requested}};
}

}  // namespace androsim
